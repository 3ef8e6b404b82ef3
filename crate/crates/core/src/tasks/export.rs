use std::io::Write;

use super::examples::Examples;
use super::split::Split;
use super::Task;

/// `examples.csv`: `task,user,date,split,target,x0,x1,...`. Windowed inputs
/// are flattened timestep-major.
pub fn write_examples_csv<W: Write>(out: W, task: Task, ex: &Examples, split: Option<&Split>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let width = ex.x.row_width();
    let mut header = vec!["task".to_string(), "user".into(), "date".into(), "split".into(), "target".into()];
    header.extend((0..width).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let mut side = vec![""; ex.len()];
    if let Some(s) = split {
        s.train_rows.iter().for_each(|&i| side[i] = "train");
        s.test_rows.iter().for_each(|&i| side[i] = "test");
    }
    for i in 0..ex.len() {
        let mut rec = vec![
            task.as_str().to_string(),
            ex.users[i].to_string(),
            ex.dates[i].format("%Y-%m-%d").to_string(),
            side[i].to_string(),
            ex.y[i].to_string(),
        ];
        rec.extend(ex.x.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
