fn main() {
    std::process::exit(shiftlab::cli::cli_main(std::env::args_os()));
}
