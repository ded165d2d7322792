//! Strict parsing of `family:key=value,...` parameter strings.

use crate::error::{Error, Result};

pub(crate) struct ParamString<'a> {
    pub family: &'a str,
    params: Vec<(&'a str, f64)>,
    used: Vec<bool>,
}

impl<'a> ParamString<'a> {
    pub fn parse(text: &'a str) -> Result<Self> {
        let text = text.trim();
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim(), Some(r)),
            None => (text, None),
        };
        if family.is_empty() {
            return Err(Error::Parse(format!("missing family name in '{text}'")));
        }
        let mut params: Vec<(&str, f64)> = Vec::new();
        if let Some(rest) = rest {
            for item in rest.split(',') {
                let (key, value) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got '{item}'")))?;
                let key = key.trim();
                let value: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("'{value}' is not a number (key '{key}')")))?;
                if !value.is_finite() {
                    return Err(Error::Parse(format!("non-finite value for '{key}'")));
                }
                if params.iter().any(|(k, _)| *k == key) {
                    return Err(Error::Parse(format!("duplicate key '{key}'")));
                }
                params.push((key, value));
            }
        }
        let used = vec![false; params.len()];
        Ok(Self { family, params, used })
    }

    pub fn take(&mut self, key: &str) -> Result<f64> {
        self.take_optional(key)?
            .ok_or_else(|| Error::Parse(format!("'{}' requires parameter '{key}'", self.family)))
    }

    pub fn take_optional(&mut self, key: &str) -> Result<Option<f64>> {
        match self.params.iter().position(|(k, _)| *k == key) {
            Some(i) => {
                self.used[i] = true;
                Ok(Some(self.params[i].1))
            }
            None => Ok(None),
        }
    }

    /// Fails if any parameter was not consumed.
    pub fn finish(self) -> Result<()> {
        match self.params.iter().zip(&self.used).find(|(_, used)| !**used) {
            Some(((k, _), _)) => Err(Error::Parse(format!(
                "unknown parameter '{k}' for '{}'",
                self.family
            ))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parsing() {
        let mut p = ParamString::parse("sum:c=1,alpha=0.5").unwrap();
        assert_eq!(p.family, "sum");
        assert_eq!(p.take("alpha").unwrap(), 0.5);
        assert!(p.take("d").is_err());
        assert!(p.finish().is_err());
        assert!(ParamString::parse("x:a=1,a=2").is_err());
        assert!(ParamString::parse("x:a").is_err());
        assert!(ParamString::parse("x:a=nan").is_err());
        assert!(ParamString::parse(":a=1").is_err());
        assert!(ParamString::parse("gamma").unwrap().finish().is_ok());
    }
}
