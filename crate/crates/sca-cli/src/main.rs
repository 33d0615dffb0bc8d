use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use sca_cli::commands;

/// Privacy-preserving image sharing through sparse codes: the secret is
/// the support, the server sees only ambiguated codes.
#[derive(Parser)]
#[command(name = "sca", version, disable_help_flag = false)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder on a directory of PGM/PPM images.
    Train {
        /// Line-based `key = value` run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Directory of training images.
        #[arg(long)]
        data: PathBuf,
        /// Output model checkpoint; the loss CSV lands next to it.
        #[arg(long)]
        out: PathBuf,
        /// Initialization and shuffling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode a directory of images and write the ambiguated public
    /// store plus the owners' key file.
    EncodeShare {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Decoys injected per code-map.
        #[arg(long, default_value_t = 0)]
        k_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output public store path.
        #[arg(long)]
        public: PathBuf,
        /// Output key file path.
        #[arg(long)]
        keys: PathBuf,
    },
    /// Reconstruct one item; with --keys the authorized view, without
    /// it the curious-server view.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        public: PathBuf,
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long)]
        item: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct one item from a uniformly guessed support.
    Attack {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        public: PathBuf,
        #[arg(long)]
        item: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the key-size / rate / guessing-complexity report.
    Stats {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Decoys per code-map assumed for the public store figures.
        #[arg(long, default_value_t = 0)]
        k_n: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit `item_id,psnr_db,ssim` CSV for store items against their
    /// originals.
    Metrics {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        public: PathBuf,
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Directory holding the original images.
        #[arg(long)]
        data: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successes; everything else is a usage error
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Train {
            config,
            data,
            out,
            seed,
        } => commands::cmd_train(&config, &data, &out, seed),
        Command::EncodeShare {
            model,
            data,
            k_n,
            seed,
            public,
            keys,
        } => commands::cmd_encode_share(&model, &data, k_n, seed, &public, &keys),
        Command::Decode {
            model,
            public,
            keys,
            item,
            out,
        } => commands::cmd_decode(&model, &public, keys.as_deref(), &item, &out),
        Command::Attack {
            model,
            public,
            item,
            seed,
            out,
        } => commands::cmd_attack(&model, &public, &item, seed, &out),
        Command::Stats {
            model,
            config,
            k_n,
            out,
        } => commands::cmd_stats(model.as_deref(), config.as_deref(), k_n, out.as_deref()),
        Command::Metrics {
            model,
            public,
            keys,
            data,
            out,
        } => commands::cmd_metrics(&model, &public, keys.as_deref(), &data, out.as_deref()),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
