//! Small end-to-end identification run: synthesize a labeled dataset, index
//! it three ways, and compare hit/penetration tradeoffs.
//!
//! ```sh
//! cargo run --release --example identify
//! ```

use hamvec::eval::{decidability_index, eer, run_benchmark, score_codes, BenchOptions, Engine};
use hamvec::synth::{generate, SynthSpec};

fn main() -> hamvec::Result<()> {
    let spec = SynthSpec::new(200, 8, 512, 0.05, 42);
    let (gallery, probes) = generate(&spec)?;
    println!(
        "gallery {} codes, probes {} codes, {} classes at {} bits",
        gallery.len(),
        probes.len(),
        spec.classes,
        spec.width
    );

    let scores = score_codes(&gallery, &probes, 20, 7)?;
    let (rate, threshold) = eer(&scores)?;
    println!(
        "verification: EER {:.3}% at similarity {:.3}, DI {:.1}",
        rate * 100.0,
        threshold,
        decidability_index(&scores)?
    );

    let opts = BenchOptions {
        t: 16,
        leaf_cap: 4,
        threads: 0,
    };
    for engine in [
        Engine::Mih,
        Engine::MihOptimized,
        Engine::BallTree,
        Engine::Linear,
    ] {
        let report = run_benchmark(&gallery, &probes, engine, 56, &opts)?;
        println!(
            "{engine:>9}: hit {:.2}% penetration {:.4}% mean query {:.1} us",
            report.hit_rate * 100.0,
            report.penetration_rate * 100.0,
            report.mean_query_time * 1e6
        );
    }
    Ok(())
}
