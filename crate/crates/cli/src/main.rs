fn main() {
    std::process::exit(rpf_cli::run(std::env::args_os()));
}
