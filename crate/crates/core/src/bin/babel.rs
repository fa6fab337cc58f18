fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("babel=info")).init();
    std::process::exit(babel::cli::run(std::env::args_os()));
}
