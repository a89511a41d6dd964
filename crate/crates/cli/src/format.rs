//! Locale-independent number formatting and the decay CSV schema.

use nmrb::analysis::DecayCurve;

use crate::CliError;

/// C-style `%.12g`.
pub fn fmt_g(x: f64) -> String {
    const P: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..P).contains(&exp) {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses `depth,value,stderr` rows, skipping `#` lines and the header.
/// Also returns the comment lines.
pub fn parse_decay_csv(text: &str) -> Result<(DecayCurve, Vec<String>), CliError> {
    let mut comments = Vec::new();
    let mut header_seen = false;
    let (mut depths, mut values, mut errs) = (Vec::new(), Vec::new(), Vec::new());
    let mut any_err = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        let bad = |m: &str| CliError::MalformedCsv(format!("line {}: {m}", lineno + 1));
        if !header_seen {
            if line.replace(' ', "") != "depth,value,stderr" {
                return Err(bad("expected header depth,value,stderr"));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        depths.push(fields[0].parse::<usize>().map_err(|_| bad("depth is not an integer"))?);
        values.push(fields[1].parse::<f64>().map_err(|_| bad("value is not a number"))?);
        errs.push(if fields[2].is_empty() {
            0.0
        } else {
            any_err = true;
            fields[2].parse::<f64>().map_err(|_| bad("stderr is not a number"))?
        });
    }
    if !header_seen {
        return Err(CliError::MalformedCsv("missing header".into()));
    }
    let curve = DecayCurve::new(depths, values, any_err.then_some(errs)).map_err(|e| CliError::MalformedCsv(e.to_string()))?;
    Ok((curve, comments))
}
