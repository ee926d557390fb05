use clap::Parser;

fn main() -> anyhow::Result<()> {
    pansharp_cli::run(pansharp_cli::Cli::parse())
}
