fn main() {
    std::process::exit(occukit::cli::main_with_args(std::env::args_os()));
}
