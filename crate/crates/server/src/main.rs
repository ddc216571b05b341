fn main() {
    std::process::exit(wayfind_server::cli::run(std::env::args_os()));
}
