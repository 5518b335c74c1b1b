//! Parsers for list-valued flags.

use bumpsim::ConfigurationName;

/// Seeds as `N`, `N..M` (end exclusive), `N..=M` or a comma list of those.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| format!("bad seed `{s}` in `{text}`"))
        };
        if let Some((a, b)) = part.split_once("..=") {
            let (a, b) = (num(a)?, num(b)?);
            if a > b {
                return Err(format!("empty seed range `{part}`"));
            }
            seeds.extend(a..=b);
        } else if let Some((a, b)) = part.split_once("..") {
            let (a, b) = (num(a)?, num(b)?);
            if a >= b {
                return Err(format!("empty seed range `{part}`"));
            }
            seeds.extend(a..b);
        } else {
            seeds.push(num(part)?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

pub fn parse_configset(text: &str) -> Result<Vec<ConfigurationName>, String> {
    let names = text
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<ConfigurationName>, _>>()
        .map_err(|e| e.to_string())?;
    if names.is_empty() {
        return Err("no configuration names given".into());
    }
    Ok(names)
}

/// `path=value` override.
pub fn parse_override(text: &str) -> Result<(String, String), String> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got `{text}`")),
    }
}

pub fn parse_values(text: &str) -> Result<Vec<String>, String> {
    let values: Vec<String> = text
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(String::from)
        .collect();
    if values.is_empty() {
        return Err("no values given".into());
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7, 0..2").unwrap(), vec![7, 0, 1]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a..b").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn configset_forms() {
        assert_eq!(
            parse_configset("full_soft,HalfSoft").unwrap(),
            vec![ConfigurationName::FullSoft, ConfigurationName::HalfSoft]
        );
        assert!(parse_configset("full_plastic").is_err());
    }

    #[test]
    fn overrides() {
        assert_eq!(parse_override("dt = 0.001").unwrap(), ("dt".into(), "0.001".into()));
        assert!(parse_override("dt").is_err());
        assert!(parse_override("=1").is_err());
    }
}
