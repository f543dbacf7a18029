//! Raw provider rows through the preprocessing pipeline: projection onto the
//! goal line, post-width correction, distance filter and left-foot reflection.

use shotmix::preprocess::{parse_csv, run_pipeline_parsed, PipelineConfig};

const RAW: &str = "\
player_id,season_id,timestamp,outcome,start_x,start_y,end_x,end_y,end_z,body_part,xg,postxg
7,2019,100,Goal,100,40,118,41,1.0,RightFoot,0.12,0.55
7,2019,200,Saved,102,35,119,39,0.5,LeftFoot,0.08,0.20
7,2019,300,OffTarget,98,45,120,30,3.1,RightFoot,0.05,0.0
8,2019,150,Saved,104,40,117,42,oops,Header,0.10,0.15
8,2019,250,Post,117,38,119,43.5,1.2,RightFoot,0.09,0.0
";

fn main() -> shotmix::Result<()> {
    let parsed = parse_csv(RAW.as_bytes()).expect("well-formed CSV");
    let out = run_pipeline_parsed(&parsed, &PipelineConfig::default())?;
    for s in &out.shots {
        println!(
            "{} {} {:?} y={:+.3} z={:.2} {:?} reflected={}",
            s.player_id, s.season_id, s.half, s.end_point.y, s.end_point.z, s.outcome, s.reflected
        );
    }
    for r in &out.rejections {
        println!("rejected row {}: {} ({})", r.row_number, r.reason.code(), r.detail);
    }
    Ok(())
}
