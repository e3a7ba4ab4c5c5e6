fn main() {
    std::process::exit(jointcon::cli::cli_main(std::env::args_os()));
}
