use std::fmt::Write;

/// One checkpoint's result: A as landlord against B, and A as peasants against B.
#[derive(Clone, PartialEq, Debug)]
pub struct WpRow {
    pub step: String,
    pub wp_landlord: f64,
    pub wp_peasants: f64,
}

pub const WP_CSV_HEADER: &str = "step,wp_landlord,wp_peasants";

/// Fixed-width text table, one row per checkpoint, WPs to four decimals.
pub fn wp_table(a: &str, b: &str, rows: &[WpRow]) -> String {
    let left = format!("{a}(L.) vs. {b}(P.)");
    let right = format!("{a}(P.) vs. {b}(L.)");
    let w1 = left.len().max(6);
    let w2 = right.len().max(6);
    let w0 = rows.iter().map(|r| r.step.len()).max().unwrap_or(0).max(4);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w0$}  {:>w1$}  {:>w2$}", "Step", left, right);
    for r in rows {
        let _ = writeln!(out, "{:<w0$}  {:>w1$.4}  {:>w2$.4}", r.step, r.wp_landlord, r.wp_peasants);
    }
    out
}

pub fn wp_csv(rows: &[WpRow]) -> String {
    let mut out = String::from(WP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{:.4},{:.4}", r.step, r.wp_landlord, r.wp_peasants);
    }
    out
}
