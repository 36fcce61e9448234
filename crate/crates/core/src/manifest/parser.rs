//! Recursive-descent parser for the manifest DSL. Errors carry line/column
//! and the expected-token set.

use super::ast::{Ast, CoordDecl, Decl, Manifest};
use super::lexer::{lex, Spanned, Tok};
use crate::error::{Error, Result};

pub fn parse_manifest(text: &str) -> Result<Manifest> {
    parse_manifest_with_spans(text).map(|(m, _)| m)
}

/// Parse and also return one (line, column) per declaration, for semantic
/// error locations.
pub fn parse_manifest_with_spans(text: &str) -> Result<(Manifest, Vec<(usize, usize)>)> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut decls = Vec::new();
    let mut spans = Vec::new();
    while !p.at_eof() {
        spans.push((p.peek().line, p.peek().col));
        decls.push(p.decl()?);
    }
    Ok((Manifest { decls }, spans))
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &str) -> Error {
        let t = self.peek();
        Error::Parse {
            line: t.line,
            col: t.col,
            msg: format!("found {}", t.tok),
            expected: expected.into(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Spanned> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.err(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.err(expected)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        match &self.peek().tok {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.err(&format!("keyword `{kw}`"))),
        }
    }

    fn int(&mut self, expected: &str) -> Result<i64> {
        match self.peek().tok {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.err(expected)),
        }
    }

    fn index(&mut self) -> Result<usize> {
        // 1-based index in brackets
        self.expect(Tok::LBracket, "`[`")?;
        let t = self.peek().clone();
        let n = self.int("a 1-based index")?;
        self.expect(Tok::RBracket, "`]`")?;
        if n < 1 {
            return Err(Error::Parse {
                line: t.line,
                col: t.col,
                msg: format!("index {n} is not positive"),
                expected: "an index >= 1".into(),
            });
        }
        Ok((n - 1) as usize)
    }

    fn decl(&mut self) -> Result<Decl> {
        let kw = self.ident(
            "a declaration keyword (chart, function, transition, splitting, algebroid, connection, gauge, section, poisson, run)",
        )?;
        match kw.as_str() {
            "chart" => self.chart(),
            "function" => self.function(),
            "transition" => self.transition(false),
            "splitting" => self.transition(true),
            "algebroid" => self.algebroid(),
            "connection" => self.connection(),
            "gauge" => self.gauge(),
            "section" => self.section(),
            "poisson" => self.poisson(),
            "run" => self.run(),
            other => Err(Error::Parse {
                line: self.peek().line,
                col: self.peek().col,
                msg: format!("unknown declaration `{other}`"),
                expected: "chart, function, transition, splitting, algebroid, connection, gauge, section, poisson or run".into(),
            }),
        }
    }

    fn chart(&mut self) -> Result<Decl> {
        let name = self.ident("a chart name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut coords = Vec::new();
        while self.peek().tok != Tok::RBrace {
            self.keyword("coord")?;
            let cname = self.ident("a coordinate name")?;
            self.keyword("weight")?;
            let mut weight = vec![self.int("a weight")? as u32];
            while self.peek().tok == Tok::Comma {
                self.bump();
                weight.push(self.int("a weight")? as u32);
            }
            let mut odd = false;
            if let Tok::Ident(s) = &self.peek().tok {
                if s == "odd" {
                    odd = true;
                    self.bump();
                }
            }
            self.expect(Tok::Semi, "`;`")?;
            coords.push(CoordDecl {
                name: cname,
                weight,
                odd,
            });
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Decl::Chart { name, coords })
    }

    fn function(&mut self) -> Result<Decl> {
        let name = self.ident("a function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::RParen {
            args.push(self.ident("an argument name")?);
            while self.peek().tok == Tok::Comma {
                self.bump();
                args.push(self.ident("an argument name")?);
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(Decl::Function { name, args })
    }

    fn assignment_block(&mut self) -> Result<Vec<(String, Ast)>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while self.peek().tok != Tok::RBrace {
            let c = self.ident("a coordinate name")?;
            self.expect(Tok::Eq, "`=`")?;
            let e = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            out.push((c, e));
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(out)
    }

    fn transition(&mut self, splitting: bool) -> Result<Decl> {
        let name = self.ident("a transition name")?;
        self.expect(Tok::Colon, "`:`")?;
        let from = self.ident("the source chart name")?;
        self.expect(Tok::Arrow, "`->`")?;
        let to = self.ident("the target chart name")?;
        let forward = self.assignment_block()?;
        self.keyword("inverse")?;
        let inverse = self.assignment_block()?;
        Ok(Decl::Transition {
            name,
            from,
            to,
            forward,
            inverse,
            splitting,
        })
    }

    fn algebroid(&mut self) -> Result<Decl> {
        let name = self.ident("an algebroid name")?;
        self.keyword("on")?;
        let chart = self.ident("a chart name")?;
        self.expect(Tok::LBrace, "`{`")?;
        self.keyword("rank")?;
        let rank = self.int("the rank")? as usize;
        self.expect(Tok::Semi, "`;`")?;
        let mut anchor = Vec::new();
        let mut structure = Vec::new();
        while self.peek().tok != Tok::RBrace {
            self.keyword("Q")?;
            let i = self.index()?;
            let j = self.index()?;
            if self.peek().tok == Tok::LBracket {
                let k = self.index()?;
                self.expect(Tok::Eq, "`=`")?;
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                structure.push(((i, j, k), e));
            } else {
                self.expect(Tok::Eq, "`=`")?;
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                anchor.push(((i, j), e));
            }
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Decl::Algebroid {
            name,
            chart,
            rank,
            anchor,
            structure,
        })
    }

    fn connection(&mut self) -> Result<Decl> {
        let name = self.ident("a connection name")?;
        self.expect(Tok::Colon, "`:`")?;
        let algebroid = self.ident("an algebroid name")?;
        self.expect(Tok::Star, "`*`")?;
        let chart = self.ident("a chart name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut gammas = Vec::new();
        while self.peek().tok != Tok::RBrace {
            self.keyword("Gamma")?;
            let i = self.index()?;
            self.expect(Tok::LBracket, "`[`")?;
            let coord = self.ident("a fibre coordinate name")?;
            self.expect(Tok::RBracket, "`]`")?;
            self.expect(Tok::Eq, "`=`")?;
            let e = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            gammas.push(((i, coord), e));
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Decl::Connection {
            name,
            algebroid,
            chart,
            gammas,
        })
    }

    fn gauge(&mut self) -> Result<Decl> {
        let name = self.ident("a gauge element name")?;
        self.keyword("on")?;
        let connection = self.ident("a connection name")?;
        let forward = self.assignment_block()?;
        self.keyword("inverse")?;
        let inverse = self.assignment_block()?;
        Ok(Decl::Gauge {
            name,
            connection,
            forward,
            inverse,
        })
    }

    fn section(&mut self) -> Result<Decl> {
        let name = self.ident("a section name")?;
        self.keyword("of")?;
        let algebroid = self.ident("an algebroid name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut components = Vec::new();
        while self.peek().tok != Tok::RBrace {
            self.keyword("u")?;
            let i = self.index()?;
            self.expect(Tok::Eq, "`=`")?;
            let e = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            components.push((i, e));
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Decl::Section {
            name,
            algebroid,
            components,
        })
    }

    fn poisson(&mut self) -> Result<Decl> {
        let name = self.ident("a Poisson structure name")?;
        self.keyword("on")?;
        let chart = self.ident("a chart name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut components = Vec::new();
        while self.peek().tok != Tok::RBrace {
            self.keyword("P")?;
            let a = self.index()?;
            let b = self.index()?;
            self.expect(Tok::Eq, "`=`")?;
            let e = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            components.push(((a, b), e));
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Decl::Poisson {
            name,
            chart,
            components,
        })
    }

    fn run(&mut self) -> Result<Decl> {
        let command = self.ident("a command name")?;
        let mut args = Vec::new();
        while self.peek().tok != Tok::Semi {
            match &self.peek().tok {
                Tok::Ident(s) => {
                    args.push(s.clone());
                    self.bump();
                }
                Tok::Int(n) => {
                    args.push(n.to_string());
                    self.bump();
                }
                _ => return Err(self.err("a command argument or `;`")),
            }
        }
        self.expect(Tok::Semi, "`;`")?;
        Ok(Decl::Run { command, args })
    }

    // Expression grammar: sum > product > unary > power > atom.
    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.product()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.product()?;
                    lhs = Ast::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.product()?;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn product(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Ast::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Ast::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let t = self.peek().clone();
            let n = self.int("a non-negative integer exponent")?;
            if n < 0 {
                return Err(Error::Parse {
                    line: t.line,
                    col: t.col,
                    msg: format!("negative exponent {n}"),
                    expected: "a non-negative exponent".into(),
                });
            }
            return Ok(Ast::Pow(Box::new(base), n as u32));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Ast> {
        match &self.peek().tok {
            Tok::Int(n) => {
                let n = *n;
                self.bump();
                Ok(Ast::Int(n))
            }
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(Ast::Ident(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.err("an integer, identifier or `(`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_chart_manifest() {
        let m = parse_manifest("chart F { coord x weight 0; coord y weight 1; }").unwrap();
        assert_eq!(m.decls.len(), 1);
    }

    #[test]
    fn print_parse_fixpoint() {
        let text = r#"
chart F2 { coord x weight 0; coord y weight 1; coord z weight 2; }
function g(x);
transition T : F2 -> F2 {
  z = z + 1/2*y^2*g;
} inverse {
  z = z - 1/2*y^2*g;
}
algebroid A on M { rank 2; Q[1][1] = 1; Q[1][2][2] = x; }
connection C : A * F2 { Gamma[1][y] = y*g; }
section u of A { u[1] = x; u[2] = 1; }
run validate;
run curvature C;
"#;
        let m = parse_manifest(text).unwrap();
        let printed = m.print();
        let m2 = parse_manifest(&printed).unwrap();
        assert_eq!(m, m2);
        assert_eq!(printed, parse_manifest(&m2.print()).unwrap().print());
    }

    #[test]
    fn parse_error_carries_location() {
        let err = parse_manifest("chart F { coord x weight ; }").unwrap_err();
        match err {
            crate::error::Error::Parse { line, col, .. } => {
                assert_eq!(line, 1);
                assert!(col > 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn nested_expression_precedence() {
        let m = parse_manifest("section u of A { u[1] = -x^2 + 3*(x - 1); }").unwrap();
        if let Decl::Section { components, .. } = &m.decls[0] {
            let printed = components[0].1.print();
            assert_eq!(printed, "-x^2 + 3*(x - 1)");
        } else {
            panic!("not a section");
        }
    }
}
