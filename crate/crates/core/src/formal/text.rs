//! Canonical text form of polynomials and the expression parser.
//!
//! Grammar (whitespace and newlines are insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | identifier | '(' expr ')'
//! ```
//!
//! Numbers are integers, decimals or e-notation and are read exactly. The
//! identifier `i` is the imaginary unit unless it is declared as a variable.
//! Exponents must reduce to nonnegative integer constants, and only constants
//! may appear as divisors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::coeff::{Exact, Scalar};
use super::poly::Polynomial;
use crate::error::{Error, Result};

const MAX_EXPONENT: u32 = 4096;

/// `x1, ..., xd`.
pub fn default_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

fn coefficient_text<C: Scalar>(c: &C) -> String {
    let (re, im) = c.text_parts();
    let re_zero = is_zero_literal(&re);
    let im_zero = is_zero_literal(&im);
    let imag = || match im.as_str() {
        "1" => "i".to_string(),
        "-1" => "-i".to_string(),
        s => format!("{s}*i"),
    };
    match (re_zero, im_zero) {
        (_, true) => re,
        (true, false) => imag(),
        (false, false) => {
            if let Some(rest) = im.strip_prefix('-') {
                let mag = if rest == "1" { "i".to_string() } else { format!("{rest}*i") };
                format!("({re}-{mag})")
            } else {
                format!("({re}+{})", imag())
            }
        }
    }
}

fn is_zero_literal(s: &str) -> bool {
    s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.')
}

/// Renders `p` as a sum of `coeff*x1^a1*...` terms in lexicographic exponent order.
pub fn format_polynomial<C: Scalar>(p: &Polynomial<C>, names: &[String]) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (k, (exps, c)) in p.terms().enumerate() {
        let mono: Vec<String> = exps
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0)
            .map(|(j, &a)| if a == 1 { names[j].clone() } else { format!("{}^{}", names[j], a) })
            .collect();
        let ctext = coefficient_text(c);
        let term = if mono.is_empty() {
            ctext
        } else {
            let mono = mono.join("*");
            match ctext.as_str() {
                "1" => mono,
                "-1" => format!("-{mono}"),
                _ => format!("{ctext}*{mono}"),
            }
        };
        if k == 0 {
            out.push_str(&term);
        } else if let Some(rest) = term.strip_prefix('-') {
            out.push_str(" - ");
            out.push_str(rest);
        } else {
            out.push_str(" + ");
            out.push_str(&term);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start = (line, column);
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let j0 = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int_part: String = chars[j0..i].iter().collect();
            let mut frac_part = String::new();
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let f0 = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                frac_part = chars[f0..i].iter().collect();
            }
            let mut exp: i64 = 0;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                let mut neg = false;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    neg = chars[k] == '-';
                    k += 1;
                }
                let e0 = k;
                while k < chars.len() && chars[k].is_ascii_digit() {
                    k += 1;
                }
                if k > e0 {
                    let digits: String = chars[e0..k].iter().collect();
                    let v: i64 = digits.parse().map_err(|_| Error::Syntax {
                        line: start.0,
                        column: start.1,
                        message: "exponent of number literal too large".into(),
                    })?;
                    if v > 400 {
                        return Err(Error::Syntax {
                            line: start.0,
                            column: start.1,
                            message: "exponent of number literal too large".into(),
                        });
                    }
                    exp = if neg { -v } else { v };
                    i = k;
                }
            }
            let digits = format!("{int_part}{frac_part}");
            let mantissa: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().expect("digits") };
            let scale = exp - frac_part.len() as i64;
            let ten = BigInt::from(10);
            let value = if scale >= 0 {
                BigRational::from_integer(mantissa * num_traits::pow(ten, scale as usize))
            } else {
                BigRational::new(mantissa, num_traits::pow(ten, (-scale) as usize))
            };
            column += i - j0;
            out.push(Token { tok: Tok::Num(value), line: start.0, column: start.1 });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let j0 = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - j0;
            out.push(Token { tok: Tok::Ident(chars[j0..i].iter().collect()), line: start.0, column: start.1 });
            continue;
        }
        if "+-*/^()".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line, column });
            column += 1;
            i += 1;
            continue;
        }
        return Err(Error::Syntax { line, column, message: format!("unexpected character `{c}`") });
    }
    out.push(Token { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    names: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(t: &Token, message: impl Into<String>) -> Error {
        Error::Syntax { line: t.line, column: t.column, message: message.into() }
    }

    fn dim(&self) -> usize {
        self.names.len()
    }

    fn expr(&mut self) -> Result<Polynomial<Exact>> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Sym('+') => {
                    self.bump();
                    acc = acc + self.term()?;
                }
                Tok::Sym('-') => {
                    self.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial<Exact>> {
        let mut acc = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Sym('*') => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Tok::Sym('/') => {
                    let op = self.bump();
                    let rhs = self.unary()?;
                    if !rhs.is_constant() {
                        return Err(Self::syntax(&op, "division by a non-constant expression"));
                    }
                    let c = rhs.constant_term();
                    if c.is_zero() {
                        return Err(Self::syntax(&op, "division by zero"));
                    }
                    acc = acc.scale(&c.recip());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial<Exact>> {
        match self.peek().tok {
            Tok::Sym('-') => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Sym('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial<Exact>> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Sym('^') {
            return Ok(base);
        }
        self.bump();
        let at = self.peek().clone();
        let e = self.unary()?;
        let bad = || Error::NonIntegerExponent { line: at.line, column: at.column };
        if !e.is_constant() {
            return Err(bad());
        }
        let c = e.constant_term();
        if !c.im.is_zero() || !c.re.is_integer() || c.re.is_negative() {
            return Err(bad());
        }
        let k = c.re.to_integer().to_u32().filter(|&k| k <= MAX_EXPONENT).ok_or_else(|| Self::syntax(&at, "exponent too large"))?;
        Ok(base.pow(k))
    }

    fn atom(&mut self) -> Result<Polynomial<Exact>> {
        let t = self.bump();
        match &t.tok {
            Tok::Num(v) => Ok(Polynomial::constant(self.dim(), Exact::real(v.clone()))),
            Tok::Ident(name) => {
                if let Some(j) = self.names.iter().position(|n| n == name) {
                    Polynomial::variable(self.dim(), j)
                } else if name == "i" {
                    Ok(Polynomial::constant(self.dim(), Exact::imag_unit()))
                } else {
                    Err(Error::UnknownVariable { name: name.clone(), line: t.line, column: t.column })
                }
            }
            Tok::Sym('(') => {
                let inner = self.expr()?;
                let close = self.bump();
                if close.tok != Tok::Sym(')') {
                    return Err(Self::syntax(&close, "expected `)`"));
                }
                Ok(inner)
            }
            Tok::End => Err(Self::syntax(&t, "unexpected end of input")),
            Tok::Sym(c) => Err(Self::syntax(&t, format!("unexpected `{c}`"))),
        }
    }
}

/// Parses `text` into an exact polynomial in the variables `names`.
pub fn parse_expression(text: &str, names: &[String]) -> Result<Polynomial<Exact>> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, names };
    let out = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return Err(Parser::syntax(&t, "unexpected trailing input"));
    }
    Ok(out)
}

/// Parses a coefficient. Accepts the report form `p/q+r/si` as well as any
/// constant expression such as `(1/2 + 3/4*i)`.
pub fn parse_coefficient(text: &str) -> Result<Exact> {
    let t = text.trim();
    if let Some(body) = t.strip_suffix('i') {
        if !body.ends_with('*') && body.chars().last().is_none_or(|c| c.is_ascii_digit() || c == '+' || c == '-') {
            let split = body
                .char_indices()
                .filter(|&(k, c)| k > 0 && (c == '+' || c == '-') && !matches!(body[..k].chars().last(), Some('e' | 'E')))
                .map(|(k, _)| k)
                .next_back();
            let (re_text, im_text) = match split {
                Some(k) => (&body[..k], &body[k..]),
                None => ("0", body),
            };
            let im_text = match im_text {
                "" | "+" => "1",
                "-" => "-1",
                s => s,
            };
            let re = parse_real_constant(re_text)?;
            let im = parse_real_constant(im_text)?;
            return Ok(Exact::new(re, im));
        }
    }
    let p = parse_expression(t, &[])?;
    Ok(p.constant_term())
}

/// Parses a real constant expression such as `-3/4` or `0.125`.
pub fn parse_real_constant(text: &str) -> Result<BigRational> {
    let c = parse_expression(text, &[])?.constant_term();
    if !c.im.is_zero() {
        return Err(Error::Syntax { line: 1, column: 1, message: format!("`{text}` is not a real number") });
    }
    Ok(c.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_quartic_action() {
        let p = parse_expression("1/2*x^2 + x^4", &names(&["x"])).unwrap();
        assert_eq!(p.coefficient(&[2]), Exact::from_ratio(1, 2));
        assert_eq!(p.coefficient(&[4]), Exact::from_i64(1));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn decimals_are_exact() {
        let p = parse_expression("0.25*x + 1.5e-2", &names(&["x"])).unwrap();
        assert_eq!(p.coefficient(&[1]), Exact::from_ratio(1, 4));
        assert_eq!(p.constant_term(), Exact::from_ratio(3, 200));
    }

    #[test]
    fn power_binds_tighter_than_unary_minus() {
        let p = parse_expression("-x^2", &names(&["x"])).unwrap();
        assert_eq!(p.coefficient(&[2]), Exact::from_i64(-1));
        let q = parse_expression("2^3^2", &[]).unwrap();
        assert_eq!(q.constant_term(), Exact::from_i64(512));
    }

    #[test]
    fn fractional_exponent_is_rejected() {
        let err = parse_expression("x^(1/2)", &names(&["x"])).unwrap_err();
        assert_eq!(err, Error::NonIntegerExponent { line: 1, column: 3 });
        assert!(matches!(parse_expression("x^y", &names(&["x", "y"])), Err(Error::NonIntegerExponent { .. })));
        assert!(matches!(parse_expression("x^-1", &names(&["x"])), Err(Error::NonIntegerExponent { .. })));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_expression("x +\n  2*z", &names(&["x"])).unwrap_err();
        assert_eq!(err, Error::UnknownVariable { name: "z".into(), line: 2, column: 5 });
        let err = parse_expression("(x + 1", &names(&["x"])).unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, column: 7, .. }));
        assert!(matches!(parse_expression("x / x", &names(&["x"])), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("x $ 1", &names(&["x"])), Err(Error::Syntax { column: 3, .. })));
    }

    #[test]
    fn imaginary_unit() {
        let p = parse_expression("(1/2 + 3/4*i)*x", &names(&["x"])).unwrap();
        assert_eq!(p.coefficient(&[1]).to_string(), "1/2+3/4i");
    }

    #[test]
    fn canonical_text_round_trips() {
        let n = names(&["x", "y"]);
        for src in ["1 + 3*x^2", "-x*y^3 + (1/2-2*i)*x^2 - 7/3", "i*y - x", "0", "(-1/2+i)*x*y"] {
            let p = parse_expression(src, &n).unwrap();
            let text = format_polynomial(&p, &n);
            let again = parse_expression(&text, &n).unwrap();
            assert_eq!(again, p, "{src} -> {text}");
            assert_eq!(format_polynomial(&again, &n), text);
        }
    }

    #[test]
    fn canonical_text_shape() {
        let n = names(&["x"]);
        let p = parse_expression("x^4 + 1/2*x^2 - 1", &n).unwrap();
        assert_eq!(format_polynomial(&p, &n), "-1 + 1/2*x^2 + x^4");
    }

    #[test]
    fn coefficient_strings() {
        assert_eq!(parse_coefficient("105/2").unwrap(), Exact::from_ratio(105, 2));
        let z = parse_coefficient("1/2+3/4i").unwrap();
        assert_eq!(z.to_string(), "1/2+3/4i");
        assert_eq!(parse_coefficient("-i").unwrap(), -Exact::imag_unit());
        assert_eq!(parse_coefficient("2i").unwrap().to_string(), "2i");
        assert_eq!(parse_coefficient("1e-3-2i").unwrap().to_string(), "1/1000-2i");
        assert_eq!(parse_coefficient("(1/2 + i)").unwrap().to_string(), "1/2+i");
    }
}
