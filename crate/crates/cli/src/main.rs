fn main() {
    std::process::exit(owc_cli::cli_main(std::env::args_os()));
}
