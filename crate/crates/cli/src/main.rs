use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use signgt_cli::commands::{
    ablate_table, cmd_ablate, cmd_attn_dump, cmd_eval, cmd_gen, cmd_homophily, cmd_train,
};
use signgt_cli::config::{CsbmSpec, RunArgs, RunSpec};
use signgt_cli::CliError;

/// Signed-attention graph transformer: training, ablations, dataset
/// tooling, and attention exports.
#[derive(Parser)]
#[command(name = "signgt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GenArgs {
    /// Number of nodes.
    #[arg(long)]
    n: usize,
    /// Number of classes.
    #[arg(long, default_value_t = 2)]
    classes: usize,
    /// Intra-class edge probability.
    #[arg(long)]
    p_in: f64,
    /// Inter-class edge probability.
    #[arg(long)]
    p_out: f64,
    /// Feature dimension.
    #[arg(long, default_value_t = 16)]
    feat_dim: usize,
    /// Scale of the class-mean feature signal.
    #[arg(long, default_value_t = 1.0)]
    feat_signal: f64,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train over one or more seeds and summarize test accuracy.
    Train(RunArgs),
    /// Run the signed/original/tanh variants on identical seeds and splits.
    Ablate(RunArgs),
    /// Generate a synthetic dataset with controllable homophily.
    Gen(GenArgs),
    /// Print the homophily of a node dataset directory.
    Homophily {
        /// Dataset directory.
        dataset: PathBuf,
    },
    /// Train briefly and dump one node's attention row per head.
    AttnDump {
        #[command(flatten)]
        run: RunArgs,
        /// Node whose attention row to dump.
        #[arg(long)]
        node: usize,
    },
    /// Train per seed and print test accuracies without writing artifacts.
    Eval(RunArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => {
            let spec = RunSpec::from_args(&args)?;
            let summary = cmd_train(&spec)?;
            let r = &summary.results[0];
            println!(
                "{} on {}: test accuracy {:.4} +- {:.4} over {} seed(s)",
                r.variant,
                summary.dataset,
                r.mean_test_acc,
                r.stdev_test_acc,
                summary.seeds.len()
            );
            Ok(())
        }
        Command::Ablate(args) => {
            let spec = RunSpec::from_args(&args)?;
            let summary = cmd_ablate(&spec)?;
            print!("{}", ablate_table(&summary));
            Ok(())
        }
        Command::Gen(args) => {
            let csbm = CsbmSpec {
                n: args.n,
                num_classes: args.classes,
                p_in: args.p_in,
                p_out: args.p_out,
                feat_dim: args.feat_dim,
                feat_signal: args.feat_signal,
                seed: args.seed,
            };
            let h = cmd_gen(&csbm, &args.out)?;
            println!("wrote {} (homophily {:.4})", args.out.display(), h);
            Ok(())
        }
        Command::Homophily { dataset } => {
            let h = cmd_homophily(&dataset)?;
            println!("{h:.2}");
            Ok(())
        }
        Command::AttnDump { run, node } => {
            let spec = RunSpec::from_args(&run)?;
            let path = cmd_attn_dump(&spec, node)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Eval(args) => {
            let spec = RunSpec::from_args(&args)?;
            let summary = cmd_eval(&spec)?;
            let r = &summary.results[0];
            for (seed, acc) in summary.seeds.iter().zip(&r.seed_test_acc) {
                println!("seed {seed}: test accuracy {acc:.4}");
            }
            println!("mean {:.4} +- {:.4}", r.mean_test_acc, r.stdev_test_acc);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
