fn main() {
    std::process::exit(remitsim::cli::main_with_args(std::env::args_os()));
}
