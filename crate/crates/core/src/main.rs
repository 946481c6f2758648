fn main() {
    std::process::exit(hpclease::cli::main_with_args(std::env::args_os()));
}
