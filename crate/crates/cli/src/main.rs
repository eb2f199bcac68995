use std::io;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = seirkit_cli::run_command(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
