fn main() {
    std::process::exit(wsscod::cli::run(std::env::args_os()));
}
