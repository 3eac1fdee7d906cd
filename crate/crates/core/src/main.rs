use std::io::Write;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if args.iter().any(|a| a == "--debug") {
        builder.filter_level(log::LevelFilter::Debug);
    } else if args.iter().any(|a| a == "--verbose") {
        builder.filter_level(log::LevelFilter::Info);
    }
    builder
        .format(|buf, record| {
            let level = match record.level() {
                log::Level::Error => "ERROR",
                log::Level::Warn => "WARNING",
                log::Level::Info => "INFO",
                log::Level::Debug | log::Level::Trace => "DEBUG",
            };
            writeln!(buf, "{level}: {}", record.args())
        })
        .init();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = prasp::cli::main_with_args(&args, &mut out);
    let _ = out.flush();
    std::process::exit(code);
}
