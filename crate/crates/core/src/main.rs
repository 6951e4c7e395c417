fn main() {
    std::process::exit(vqs::harness::cli_main(std::env::args_os()));
}
