fn main() {
    std::process::exit(revmatch::cli::main_with_args(std::env::args_os()));
}
