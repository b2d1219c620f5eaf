//! Precedence-climbing parser for the expression grammar.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" exponent)?
//! exponent:= int | "-" int | "(" "-"? int ")"
//! primary := int | name | "exp" "(" expr ")" | "D" "[" expr ("," coord)+ "]" | "(" expr ")"
//! name    := field | field "_" [txy]+ | "t" | "x" | "y"
//! ```
//!
//! Rational literals are written as quotients, `3/2`. `D[e, c1, c2, ...]`
//! applied to a bare field is the corresponding jet; applied to anything else
//! it is the free total derivative of `e` (fiber fields are not rewritten
//! here, that needs a covering).

use num::{BigInt, BigRational};

use super::{Atom, Coordinate, Expr, FieldKind, MultiIndex, NormalForm, Workspace};
use crate::Error;

pub fn parse_expression(text: &str, ws: &Workspace) -> Result<Expr, Error> {
    let mut p = Parser { src: text, tokens: lex(text)?, pos: 0, ws };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.error("unexpected trailing input")),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Int(BigInt),
    Name(String),
    Op(char),
    End,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, Error> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
            out.push((Tok::Int(s.parse().expect("digits")), pos));
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
            out.push((Tok::Name(s), pos));
        } else if "+-*/^()[],".contains(c) {
            out.push((Tok::Op(c), pos));
            i += 1;
        } else {
            return Err(Error::Syntax { pos, message: format!("unexpected character '{c}'") });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    ws: &'a Workspace,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: &str) -> Error {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            _ => format!("'{}'", self.src[self.offset()..].chars().next().unwrap_or(' ')),
        };
        Error::Syntax { pos: self.offset(), message: format!("{msg}, found {found}") }
    }

    fn expect(&mut self, c: char) -> Result<(), Error> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    terms.push(-self.term()?);
                }
                _ => return Ok(Expr::sum(terms)),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, Error> {
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    let d = self.unary()?;
                    // keep integer quotients as a single rational literal
                    match (factors.last(), &d) {
                        (Some(Expr::Const(n)), Expr::Const(m))
                            if n.is_integer() && m.is_integer() && !num::Zero::is_zero(m) =>
                        {
                            let q = n / m;
                            *factors.last_mut().unwrap() = Expr::Const(q);
                        }
                        _ => factors.push(d.pow(-1)),
                    }
                }
                _ => return Ok(Expr::product(factors)),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, Error> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                e => -e,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, Error> {
        let base = self.primary()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let n = self.exponent()?;
        Ok(match base {
            Expr::Const(c) if n >= 0 => Expr::Const(num::pow(c, n as usize)),
            b => Expr::Pow(Box::new(b), n),
        })
    }

    fn exponent(&mut self) -> Result<i64, Error> {
        let paren = *self.peek() == Tok::Op('(');
        if paren {
            self.bump();
        }
        let neg = *self.peek() == Tok::Op('-');
        if neg {
            self.bump();
        }
        let n = match self.peek() {
            Tok::Int(n) => {
                let n = i64::try_from(n.clone()).map_err(|_| self.error("exponent out of range"))?;
                self.bump();
                n
            }
            _ => return Err(self.error("expected integer exponent")),
        };
        if paren {
            self.expect(')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn primary(&mut self) -> Result<Expr, Error> {
        let at = self.offset();
        match self.bump() {
            Tok::Int(n) => Ok(Expr::Const(BigRational::from_integer(n))),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Name(name) if name == "exp" => {
                self.expect('(')?;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e.exp())
            }
            Tok::Name(name) if name == "D" => self.derivative(),
            Tok::Name(name) => self.name(&name, at),
            _ => {
                self.pos = self.tokens.iter().position(|(_, o)| *o == at).unwrap_or(self.pos);
                Err(self.error("expected an expression"))
            }
        }
    }

    fn derivative(&mut self) -> Result<Expr, Error> {
        self.expect('[')?;
        let inner = self.expr()?;
        let mut coords = Vec::new();
        while *self.peek() == Tok::Op(',') {
            self.bump();
            let at = self.offset();
            match self.bump() {
                Tok::Name(n) if n.len() == 1 && Coordinate::from_char(n.chars().next().unwrap()).is_some() => {
                    coords.push(Coordinate::from_char(n.chars().next().unwrap()).unwrap());
                }
                _ => {
                    return Err(Error::Syntax { pos: at, message: "expected coordinate t, x or y".into() });
                }
            }
        }
        if coords.is_empty() {
            return Err(self.error("expected ',' and a coordinate"));
        }
        self.expect(']')?;
        if let Expr::Atom(Atom::Jet(j)) = &inner {
            if j.field.kind() == FieldKind::Parameter {
                return Ok(Expr::zero());
            }
            let mut index = j.index;
            for c in coords {
                index = index.raised(c);
            }
            return Ok(Expr::jet(j.field.jet(index)));
        }
        let mut nf = NormalForm::from_expr(&inner)?;
        for c in coords {
            nf = nf.derive_with(&mut |a: &Atom| {
                Ok(match a {
                    Atom::Coord(k) if *k == c => NormalForm::one(),
                    Atom::Coord(_) => NormalForm::zero(),
                    Atom::Jet(j) if j.field.kind() == FieldKind::Parameter => NormalForm::zero(),
                    Atom::Jet(j) => NormalForm::jet(j.raised(c)),
                })
            })?;
        }
        Ok(nf.to_expr())
    }

    fn name(&self, name: &str, at: usize) -> Result<Expr, Error> {
        if name.len() == 1 {
            if let Some(c) = Coordinate::from_char(name.chars().next().unwrap()) {
                return Ok(Expr::coord(c));
            }
        }
        let (base, suffix) = match name.split_once('_') {
            Some((b, s)) => (b, Some(s)),
            None => (name, None),
        };
        let Some(field) = self.ws.field(base) else {
            return Err(Error::UnknownIdentifier { name: base.to_string(), pos: at });
        };
        let mut index = MultiIndex::ZERO;
        if let Some(s) = suffix {
            if field.kind() == FieldKind::Parameter {
                return Err(Error::DerivativeOnParameter { name: base.to_string(), pos: at });
            }
            if s.is_empty() {
                return Err(Error::Syntax { pos: at + base.len(), message: "empty derivative suffix".into() });
            }
            for (k, ch) in s.char_indices() {
                match Coordinate::from_char(ch) {
                    Some(c) => index = index.raised(c),
                    None => {
                        return Err(Error::Syntax {
                            pos: at + base.len() + 1 + k,
                            message: format!("'{ch}' is not a coordinate in a derivative suffix"),
                        })
                    }
                }
            }
        }
        Ok(Expr::jet(field.jet(index)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> Workspace {
        Workspace::with("u v w r s", "q p", "lambda kappa").unwrap()
    }

    #[test]
    fn jets_and_suffixes() {
        let e = ws().parse("u_x*u_xy - u_y*u_xx").unwrap();
        let atoms = NormalForm::from_expr(&e).unwrap().jets();
        assert_eq!(atoms.len(), 4);
        let a = ws().nf("u_txy").unwrap();
        let b = ws().nf("D[u, y, t, x]").unwrap();
        assert_eq!(a, b);
        assert_eq!(ws().nf("u_yxt").unwrap(), a);
    }

    #[test]
    fn literal_zero() {
        assert!(ws().nf("0").unwrap().is_zero());
    }

    #[test]
    fn precedence() {
        let ws = ws();
        assert_eq!(ws.nf("-u^2").unwrap(), ws.nf("-(u*u)").unwrap());
        assert_eq!(ws.nf("1 - 2*3").unwrap(), ws.nf("-5").unwrap());
        assert_eq!(ws.nf("2/3/4").unwrap(), ws.nf("1/6").unwrap());
        assert_eq!(ws.nf("u^-1").unwrap(), ws.nf("1/u").unwrap());
        assert_eq!(ws.nf("u^(-2)").unwrap(), ws.nf("1/u/u").unwrap());
    }

    #[test]
    fn derivative_of_compound() {
        let ws = ws();
        let a = ws.nf("D[exp(-r), x, x]").unwrap();
        let b = ws.nf("exp(-r)*(r_x^2 - r_xx)").unwrap();
        assert_eq!(a, b);
        assert!(ws.nf("D[lambda, x]").unwrap().is_zero());
        assert!(ws.nf("D[x*y, x] - y").unwrap().is_zero());
    }

    #[test]
    fn errors_carry_positions() {
        let ws = ws();
        assert!(matches!(ws.parse("u_x + z"), Err(Error::UnknownIdentifier { pos: 6, .. })));
        assert!(matches!(ws.parse("lambda_x"), Err(Error::DerivativeOnParameter { pos: 0, .. })));
        assert!(matches!(ws.parse("u_x +"), Err(Error::Syntax { pos: 5, .. })));
        assert!(matches!(ws.parse("u_z"), Err(Error::Syntax { pos: 2, .. })));
        assert!(matches!(ws.parse("(u"), Err(Error::Syntax { .. })));
        assert!(matches!(ws.parse("u $ v"), Err(Error::Syntax { pos: 2, .. })));
    }

    #[test]
    fn print_parse_round_trip() {
        let ws = ws();
        for s in ["exp(-r)/s_x", "(u_x - lambda)*p_x", "-3/2*u^(-2) + exp(2*w - p)", "u_y*q_x/q + v_y"] {
            let e = ws.parse(s).unwrap();
            let again = ws.parse(&e.to_string()).unwrap();
            assert_eq!(e.normalize().unwrap(), again.normalize().unwrap(), "{s}");
            let nf = e.normalize().unwrap();
            assert_eq!(ws.nf(&nf.to_string()).unwrap(), nf, "{s}");
        }
    }
}
