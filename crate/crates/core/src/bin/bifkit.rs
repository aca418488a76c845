fn main() {
    std::process::exit(bifurcate_kit::cli::main_with_args(std::env::args_os()));
}
