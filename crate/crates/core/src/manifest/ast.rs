//! Manifest AST and its canonical printer. `print` followed by `parse` is a
//! fixpoint: the reparsed document equals the original AST.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ast {
    Int(i64),
    Ident(String),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, u32),
}

impl Ast {
    fn prec(&self) -> u8 {
        match self {
            Ast::Add(..) | Ast::Sub(..) => 1,
            Ast::Neg(..) => 2,
            Ast::Mul(..) | Ast::Div(..) => 3,
            Ast::Pow(..) => 4,
            Ast::Int(..) | Ast::Ident(..) => 5,
        }
    }

    pub fn print(&self) -> String {
        self.print_prec(0)
    }

    fn print_prec(&self, outer: u8) -> String {
        let p = self.prec();
        let body = match self {
            Ast::Int(n) => format!("{n}"),
            Ast::Ident(s) => s.clone(),
            Ast::Neg(a) => format!("-{}", a.print_prec(p + 1)),
            Ast::Add(a, b) => format!("{} + {}", a.print_prec(p), b.print_prec(p + 1)),
            Ast::Sub(a, b) => format!("{} - {}", a.print_prec(p), b.print_prec(p + 1)),
            Ast::Mul(a, b) => format!("{}*{}", a.print_prec(p), b.print_prec(p + 1)),
            Ast::Div(a, b) => format!("{}/{}", a.print_prec(p), b.print_prec(p + 1)),
            Ast::Pow(a, n) => format!("{}^{n}", a.print_prec(p + 1)),
        };
        if p < outer {
            format!("({body})")
        } else {
            body
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordDecl {
    pub name: String,
    pub weight: Vec<u32>,
    pub odd: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decl {
    Chart {
        name: String,
        coords: Vec<CoordDecl>,
    },
    Function {
        name: String,
        args: Vec<String>,
    },
    Transition {
        name: String,
        from: String,
        to: String,
        forward: Vec<(String, Ast)>,
        inverse: Vec<(String, Ast)>,
        splitting: bool,
    },
    Algebroid {
        name: String,
        chart: String,
        rank: usize,
        anchor: Vec<((usize, usize), Ast)>,
        structure: Vec<((usize, usize, usize), Ast)>,
    },
    Connection {
        name: String,
        algebroid: String,
        chart: String,
        gammas: Vec<((usize, String), Ast)>,
    },
    Gauge {
        name: String,
        connection: String,
        forward: Vec<(String, Ast)>,
        inverse: Vec<(String, Ast)>,
    },
    Section {
        name: String,
        algebroid: String,
        components: Vec<(usize, Ast)>,
    },
    Poisson {
        name: String,
        chart: String,
        components: Vec<((usize, usize), Ast)>,
    },
    Run {
        command: String,
        args: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Manifest {
    pub decls: Vec<Decl>,
}

impl Manifest {
    pub fn print(&self) -> String {
        let mut s = String::new();
        for d in &self.decls {
            match d {
                Decl::Chart { name, coords } => {
                    s.push_str(&format!("chart {name} {{\n"));
                    for c in coords {
                        let ws: Vec<String> = c.weight.iter().map(|w| w.to_string()).collect();
                        s.push_str(&format!(
                            "  coord {} weight {}{};\n",
                            c.name,
                            ws.join(","),
                            if c.odd { " odd" } else { "" }
                        ));
                    }
                    s.push_str("}\n");
                }
                Decl::Function { name, args } => {
                    s.push_str(&format!("function {name}({});\n", args.join(", ")));
                }
                Decl::Transition {
                    name,
                    from,
                    to,
                    forward,
                    inverse,
                    splitting,
                } => {
                    let kw = if *splitting { "splitting" } else { "transition" };
                    s.push_str(&format!("{kw} {name} : {from} -> {to} {{\n"));
                    for (c, e) in forward {
                        s.push_str(&format!("  {c} = {};\n", e.print()));
                    }
                    s.push_str("} inverse {\n");
                    for (c, e) in inverse {
                        s.push_str(&format!("  {c} = {};\n", e.print()));
                    }
                    s.push_str("}\n");
                }
                Decl::Algebroid {
                    name,
                    chart,
                    rank,
                    anchor,
                    structure,
                } => {
                    s.push_str(&format!("algebroid {name} on {chart} {{\n  rank {rank};\n"));
                    for ((i, a), e) in anchor {
                        s.push_str(&format!("  Q[{}][{}] = {};\n", i + 1, a + 1, e.print()));
                    }
                    for ((i, j, k), e) in structure {
                        s.push_str(&format!(
                            "  Q[{}][{}][{}] = {};\n",
                            i + 1,
                            j + 1,
                            k + 1,
                            e.print()
                        ));
                    }
                    s.push_str("}\n");
                }
                Decl::Connection {
                    name,
                    algebroid,
                    chart,
                    gammas,
                } => {
                    s.push_str(&format!("connection {name} : {algebroid} * {chart} {{\n"));
                    for ((i, c), e) in gammas {
                        s.push_str(&format!("  Gamma[{}][{c}] = {};\n", i + 1, e.print()));
                    }
                    s.push_str("}\n");
                }
                Decl::Gauge {
                    name,
                    connection,
                    forward,
                    inverse,
                } => {
                    s.push_str(&format!("gauge {name} on {connection} {{\n"));
                    for (c, e) in forward {
                        s.push_str(&format!("  {c} = {};\n", e.print()));
                    }
                    s.push_str("} inverse {\n");
                    for (c, e) in inverse {
                        s.push_str(&format!("  {c} = {};\n", e.print()));
                    }
                    s.push_str("}\n");
                }
                Decl::Section {
                    name,
                    algebroid,
                    components,
                } => {
                    s.push_str(&format!("section {name} of {algebroid} {{\n"));
                    for (i, e) in components {
                        s.push_str(&format!("  u[{}] = {};\n", i + 1, e.print()));
                    }
                    s.push_str("}\n");
                }
                Decl::Poisson {
                    name,
                    chart,
                    components,
                } => {
                    s.push_str(&format!("poisson {name} on {chart} {{\n"));
                    for ((a, b), e) in components {
                        s.push_str(&format!("  P[{}][{}] = {};\n", a + 1, b + 1, e.print()));
                    }
                    s.push_str("}\n");
                }
                Decl::Run { command, args } => {
                    if args.is_empty() {
                        s.push_str(&format!("run {command};\n"));
                    } else {
                        s.push_str(&format!("run {command} {};\n", args.join(" ")));
                    }
                }
            }
        }
        s
    }
}
