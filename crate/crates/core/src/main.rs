fn main() {
    std::process::exit(bdpd::cli::parse_and_dispatch(std::env::args_os()));
}
