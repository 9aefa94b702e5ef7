//! Key=value configuration files. Flags win over file values, which win
//! over built-in defaults.

use std::collections::HashMap;
use std::path::Path;

/// Parse a `key = value` file: one pair per line, `#` starts a comment.
pub fn parse_file(path: &Path) -> Result<HashMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value", path.display(), lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn parse_value<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| format!("config key '{key}': cannot parse '{raw}'")),
    }
}

pub fn parse_list<T: std::str::FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<Vec<T>>, String> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .split(',')
            .map(|piece| piece.trim().parse())
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
            .map_err(|_| format!("config key '{key}': cannot parse '{raw}' as a list")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_pairs_and_comments() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nreps = 50\nm = 1,3  # inline\nseed=9").unwrap();
        let map = parse_file(file.path()).unwrap();
        assert_eq!(parse_value::<usize>(&map, "reps").unwrap(), Some(50));
        assert_eq!(parse_list::<usize>(&map, "m").unwrap(), Some(vec![1, 3]));
        assert_eq!(parse_value::<u64>(&map, "seed").unwrap(), Some(9));
        assert_eq!(parse_value::<u64>(&map, "missing").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "just a line").unwrap();
        assert!(parse_file(file.path()).is_err());
    }
}
