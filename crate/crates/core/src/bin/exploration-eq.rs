fn main() {
    std::process::exit(exploration_eq::cli::main_with_args(std::env::args_os()));
}
