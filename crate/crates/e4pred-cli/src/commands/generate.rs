//! Write the synthetic study to disk in the device's native CSV layout,
//! one directory per subject-week. Output is a pure function of the
//! configuration, so re-running reproduces every file byte for byte.

use e4pred::e4::synth::{generate_session, subject_label};
use e4pred::e4::write_session;

use crate::commands::Ctx;
use crate::manifest::{self, Manifest};

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let syn = ctx.config.synthetic();
    syn.validate()?;

    let raw = ctx.layout.raw_dir();
    let mut outputs = Vec::new();
    for subject in 0..syn.n_subjects {
        for week in 1..=syn.weeks_per_subject {
            outputs.push(format!("raw/{}/week_{}", subject_label(subject), week));
        }
    }
    manifest::write(
        ctx,
        Manifest {
            outputs: outputs.clone(),
            ..Manifest::new(ctx, "generate")
        },
    )?;

    for subject in 0..syn.n_subjects {
        for week in 1..=syn.weeks_per_subject {
            let session = generate_session::<f64>(&syn, subject, week)?;
            let dir = raw.join(subject_label(subject)).join(format!("week_{week}"));
            write_session(&session, &dir)?;
        }
    }

    println!(
        "generated {} sessions ({} subjects x {} weeks) under {}",
        outputs.len(),
        syn.n_subjects,
        syn.weeks_per_subject,
        raw.display()
    );
    Ok(())
}
