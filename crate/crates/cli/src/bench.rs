use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use raggednn::ragged::kernels::{gather_rows, segment_max, segment_mean, segment_sum};
use raggednn::{Error, Result};

use crate::{resolve_seed, BenchArgs, Kernel};

fn naive(kernel: Kernel, values: ArrayView2<'_, f64>, ids: &[usize], segments: usize) -> Array2<f64> {
    let width = values.ncols();
    match kernel {
        Kernel::Gather => {
            let mut out = Array2::zeros((ids.len(), width));
            for (r, &i) in ids.iter().enumerate() {
                for c in 0..width {
                    out[[r, c]] = values[[i, c]];
                }
            }
            out
        }
        _ => {
            let mut out = Array2::zeros((segments, width));
            let mut seen = vec![0usize; segments];
            for (r, &s) in ids.iter().enumerate() {
                for c in 0..width {
                    let x = values[[r, c]];
                    out[[s, c]] = match kernel {
                        Kernel::SegmentMax if seen[s] == 0 || x > out[[s, c]] => x,
                        Kernel::SegmentMax => out[[s, c]],
                        _ => out[[s, c]] + x,
                    };
                }
                seen[s] += 1;
            }
            if kernel == Kernel::SegmentMean {
                for (s, &n) in seen.iter().enumerate() {
                    for c in 0..width {
                        if n > 0 {
                            out[[s, c]] /= n as f64;
                        }
                    }
                }
            }
            out
        }
    }
}

fn fast(kernel: Kernel, values: ArrayView2<'_, f64>, ids: &[usize], segments: usize) -> Result<Array2<f64>> {
    match kernel {
        Kernel::SegmentSum => segment_sum(values, ids, segments),
        Kernel::SegmentMean => segment_mean(values, ids, segments).map(|(m, _)| m),
        Kernel::SegmentMax => segment_max(values, ids, segments).map(|(m, _)| m),
        Kernel::Gather => gather_rows(values, ids),
    }
}

fn name(kernel: Kernel) -> &'static str {
    match kernel {
        Kernel::SegmentSum => "segment_sum",
        Kernel::SegmentMean => "segment_mean",
        Kernel::SegmentMax => "segment_max",
        Kernel::Gather => "gather",
    }
}

/// Checks the kernel against the naive loop on every size, then times both.
pub fn bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    if args.reps == 0 {
        return Err(Error::Config("--reps must be at least 1".into()));
    }
    if args.sizes.is_empty() || args.sizes.contains(&0) {
        return Err(Error::Config("--sizes must list positive row counts".into()));
    }
    if args.width == 0 {
        return Err(Error::Config("--width must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(args.seed, None)?);
    let w = |out: &mut dyn Write, line: String| writeln!(out, "{line}").map_err(|e| Error::Numeric(e.to_string()));
    w(out, "kernel,size,width,segments,reps,impl,ns_per_op".into())?;
    for &size in &args.sizes {
        let segments = (size / 10).max(1);
        let (rows, ids): (usize, Vec<usize>) = if args.kernel == Kernel::Gather {
            (segments, (0..size).map(|_| rng.gen_range(0..segments)).collect())
        } else {
            (size, (0..size).map(|_| rng.gen_range(0..segments)).collect())
        };
        let values = Array2::from_shape_simple_fn((rows, args.width), || rng.gen_range(-1.0..1.0));
        let expected = naive(args.kernel, values.view(), &ids, segments);
        let got = fast(args.kernel, values.view(), &ids, segments)?;
        let worst = (&got - &expected).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if got.dim() != expected.dim() || worst > 1e-12 {
            return Err(Error::Numeric(format!(
                "{} disagrees with the naive loop at size {size} (max difference {worst:e})",
                name(args.kernel)
            )));
        }
        for (label, is_fast) in [("kernel", true), ("naive", false)] {
            let start = Instant::now();
            for _ in 0..args.reps {
                if is_fast {
                    black_box(fast(args.kernel, black_box(values.view()), &ids, segments)?);
                } else {
                    black_box(naive(args.kernel, black_box(values.view()), &ids, segments));
                }
            }
            let ns = start.elapsed().as_nanos() as f64 / args.reps as f64;
            w(
                out,
                format!("{},{size},{},{segments},{},{label},{ns:.0}", name(args.kernel), args.width, args.reps),
            )?;
        }
    }
    Ok(())
}
