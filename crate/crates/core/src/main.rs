fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LF_LOG", "warn")).init();
    let code = latentfactor::cli::run_from(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
