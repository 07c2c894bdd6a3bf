fn main() {
    std::process::exit(odl::cli::run(std::env::args_os()));
}
