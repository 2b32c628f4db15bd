fn main() {
    std::process::exit(csa_uep::cli::run(std::env::args_os()));
}
