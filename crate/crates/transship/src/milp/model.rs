//! Generic mixed-integer linear model container: continuous variables with
//! bounds, binaries, linear rows, and export in the standard LP text format.

use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub binary: bool,
    pub obj: f64,
    /// Branching priority class: lower branches first.
    pub priority: i32,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    /// Sparse row as (variable index, coefficient) pairs.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Lazy rows enter the working relaxation only once violated. They are
    /// part of the model (exported, enforced at every returned solution);
    /// the flag only licenses row generation inside solvers.
    pub lazy: bool,
}

/// A minimization MILP.
#[derive(Clone, Debug, Default)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
}

impl MilpModel {
    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lb,
            ub,
            binary: false,
            obj,
            priority: 0,
        });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> usize {
        self.add_binary_with_priority(name, obj, 0)
    }

    /// Binary with an explicit branching priority class.
    pub fn add_binary_with_priority(
        &mut self,
        name: impl Into<String>,
        obj: f64,
        priority: i32,
    ) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lb: 0.0,
            ub: 1.0,
            binary: true,
            obj,
            priority,
        });
        self.vars.len() - 1
    }

    pub fn add_con(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.cons.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
            lazy: false,
        });
    }

    /// Adds a row that solvers may activate lazily.
    pub fn add_lazy_con(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.cons.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
            lazy: true,
        });
    }

    pub fn binaries(&self) -> Vec<usize> {
        self.vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.binary.then_some(i))
            .collect()
    }

    /// Objective value of a full assignment.
    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.obj * xi).sum()
    }

    /// Writes the model in the standard LP text format (coefficients printed
    /// with 12 significant digits).
    pub fn write_lp<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        fn coef(c: f64) -> String {
            format!("{:.11e}", c)
        }
        writeln!(out, "Minimize")?;
        let mut line = String::from(" obj:");
        let mut first = true;
        for v in &self.vars {
            if v.obj == 0.0 {
                continue;
            }
            let sign = if v.obj < 0.0 {
                " - "
            } else if first {
                " "
            } else {
                " + "
            };
            line.push_str(&format!("{sign}{} {}", coef(v.obj.abs()), v.name));
            first = false;
            if line.len() > 200 {
                writeln!(out, "{line}")?;
                line = String::from("   ");
            }
        }
        if first {
            line.push_str(" 0 ");
            line.push_str(&self.vars.first().map(|v| v.name.as_str()).unwrap_or("x0"));
        }
        writeln!(out, "{line}")?;

        writeln!(out, "Subject To")?;
        for con in &self.cons {
            let mut line = format!(" {}:", con.name);
            let mut first = true;
            for &(idx, c) in &con.terms {
                if c == 0.0 {
                    continue;
                }
                let sign = if c < 0.0 {
                    " - "
                } else if first {
                    " "
                } else {
                    " + "
                };
                line.push_str(&format!("{sign}{} {}", coef(c.abs()), self.vars[idx].name));
                first = false;
                if line.len() > 200 {
                    writeln!(out, "{line}")?;
                    line = String::from("   ");
                }
            }
            if first {
                line.push_str(" 0 ");
                line.push_str(&self.vars.first().map(|v| v.name.as_str()).unwrap_or("x0"));
            }
            let op = match con.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(out, "{line} {op} {}", coef(con.rhs))?;
        }

        writeln!(out, "Bounds")?;
        for v in &self.vars {
            if v.binary {
                continue;
            }
            match (v.lb.is_finite(), v.ub.is_finite()) {
                (false, false) => writeln!(out, " {} free", v.name)?,
                (true, false) => {
                    if v.lb != 0.0 {
                        writeln!(out, " {} >= {}", v.name, coef(v.lb))?;
                    }
                }
                (true, true) => writeln!(out, " {} <= {} <= {}", coef(v.lb), v.name, coef(v.ub))?,
                (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, coef(v.ub))?,
            }
        }
        let binaries = self.binaries();
        if !binaries.is_empty() {
            writeln!(out, "Binaries")?;
            let mut line = String::from(" ");
            for &b in &binaries {
                line.push_str(&self.vars[b].name);
                line.push(' ');
                if line.len() > 200 {
                    writeln!(out, "{line}")?;
                    line = String::from(" ");
                }
            }
            writeln!(out, "{line}")?;
        }
        writeln!(out, "End")?;
        Ok(())
    }
}

/// Solution of a MILP: objective and one value per model variable.
#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub objective: f64,
    pub values: Vec<f64>,
    /// Whether optimality was proven within the backend's gap tolerance.
    pub proven_optimal: bool,
    /// Branch-and-bound nodes explored (0 for direct solvers).
    pub nodes: usize,
}
