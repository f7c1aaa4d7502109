//! Reads a counting-process CSV with custom column names, checks it and
//! writes the canonical subject layout.

use recurrent_score::io::{read_dataset_csv, write_dataset_csv, ColumnMap, IngestOptions};

const INPUT: &str = "\
patient,tstart,tstop,state,cov_age
1,0,120,1,64
1,120,400,1,64
1,400,900,0,64
2,0,300,1,71
2,300,310,2,71
3,0,1500,0,58
";

fn main() -> recurrent_score::Result<()> {
    let options = IngestOptions {
        columns: ColumnMap {
            id: "patient".into(),
            start: "tstart".into(),
            stop: "tstop".into(),
            status: "state".into(),
            ..ColumnMap::default()
        },
        tau: Some(2000.0),
        ..IngestOptions::default()
    };
    let d = read_dataset_csv(INPUT.as_bytes(), &options)?;
    println!("{} subjects, {} events, scenario {:?}", d.len(), d.total_events(), d.scenario);
    let mut out = Vec::new();
    write_dataset_csv(&d, &mut out, None)?;
    print!("{}", String::from_utf8_lossy(&out));

    let broken = "id,time,kind,cov_age\n1,50,event,60\n1,40,censor,60\n";
    if let Err(e) = read_dataset_csv(broken.as_bytes(), &IngestOptions::default()) {
        println!("rejected: {e}");
    }
    Ok(())
}
