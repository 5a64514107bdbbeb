fn main() {
    std::process::exit(grid_marl::harness::main_with_args(std::env::args_os()));
}
