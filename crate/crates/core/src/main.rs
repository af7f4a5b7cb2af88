fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    conic_pdhg::cli::configure_threads();
    std::process::exit(conic_pdhg::cli::run_cli(std::env::args_os()));
}
