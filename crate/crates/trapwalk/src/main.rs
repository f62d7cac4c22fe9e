fn main() {
    std::process::exit(trapwalk::cli::main_with_args(std::env::args_os()));
}
