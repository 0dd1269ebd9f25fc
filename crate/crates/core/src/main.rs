fn main() {
    std::process::exit(doc3::cli::main_with_args(std::env::args_os()));
}
