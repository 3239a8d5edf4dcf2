fn main() {
    std::process::exit(bates_pide::cli::main_with_args(std::env::args_os()));
}
