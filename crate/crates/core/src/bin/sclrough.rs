fn main() {
    std::process::exit(sclrough::cli::main_with_args(std::env::args_os()));
}
