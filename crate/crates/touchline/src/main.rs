fn main() {
    env_logger::init();
    std::process::exit(touchline::cli::run());
}
