fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(topicret::cli::dispatch(std::env::args_os()));
}
