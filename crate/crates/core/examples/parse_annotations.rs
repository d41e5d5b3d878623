// Parse an EPIC-KITCHENS-style annotation CSV (clock timestamps, verb and
// noun classes) and inspect the resulting video records.
//
// cargo run --example parse_annotations

use std::io::Write;

use untrimmed_anticipation::annotations::{parse_annotations, ParseOptions, Vocabulary};
use untrimmed_anticipation::Result;

const CSV: &str = "\
narration_id,video_id,start_timestamp,stop_timestamp,verb_class,noun_class
P01_01_0,P01_01,00:00:01.09,00:00:03.00,0,10
P01_01_1,P01_01,00:00:02.50,00:00:04.37,3,10
P01_01_2,P01_01,00:00:09.10,00:00:12.00,1,4
P02_03_0,P02_03,00:01:02.35,00:01:05.00,2,7
";

pub fn run_example() -> Result<usize> {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("train.csv");
    std::fs::File::create(&path)
        .and_then(|mut f| f.write_all(CSV.as_bytes()))
        .expect("write fixture");

    let vocab = Vocabulary::new(97, 300)?;
    // No duration column: each video ends at its last stop plus the horizon.
    let videos = parse_annotations(&path, &vocab, &ParseOptions::default())?;
    for v in &videos {
        println!(
            "{}: {} actions, duration {:.2}s{}",
            v.video_id,
            v.actions.len(),
            v.duration,
            if v.duration_inferred { " (inferred)" } else { "" }
        );
        for a in &v.actions {
            println!(
                "  {:>7.2}..{:<7.2} verb {:>2} noun {:>3} -> action {}",
                a.start, a.stop, a.verb_class, a.noun_class, a.action_class
            );
        }
    }
    Ok(videos.iter().map(|v| v.actions.len()).sum())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
