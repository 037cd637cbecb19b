fn main() {
    let quiet = std::env::args().any(|a| a == "--quiet");
    env_logger::Builder::new()
        .filter_level(if quiet { log::LevelFilter::Error } else { log::LevelFilter::Info })
        .format_timestamp(None)
        .init();
    std::process::exit(nonattractor::cli::run(std::env::args_os()));
}
