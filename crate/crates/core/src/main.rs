fn main() {
    std::process::exit(gb_evolve::cli::main_with_args(std::env::args_os()));
}
