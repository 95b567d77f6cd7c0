//! Arithmetic-to-24 checking and solving with exact rational arithmetic.
//!
//! The checker accepts `+ - * / × ÷`, parentheses, and integer literals. An
//! expression scores 1 iff it parses, its operand multiset equals the given
//! numbers, and it evaluates to exactly 24. Division by zero inside an
//! expression scores 0 rather than erroring.

use num::rational::Ratio;
use num::Zero;

type Rat = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }
}

#[derive(Debug, Clone)]
enum Expr {
    Num(i64),
    Bin(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Exact value; `None` marks a division by zero somewhere inside.
    fn eval(&self) -> Option<Rat> {
        match self {
            Expr::Num(n) => Some(Rat::from_integer(*n)),
            Expr::Bin(op, lhs, rhs) => {
                let l = lhs.eval()?;
                let r = rhs.eval()?;
                match op {
                    Op::Add => Some(l + r),
                    Op::Sub => Some(l - r),
                    Op::Mul => Some(l * r),
                    Op::Div => {
                        if r.is_zero() {
                            None
                        } else {
                            Some(l / r)
                        }
                    }
                }
            }
        }
    }

    fn collect_operands(&self, out: &mut Vec<i64>) {
        match self {
            Expr::Num(n) => out.push(*n),
            Expr::Bin(_, lhs, rhs) => {
                lhs.collect_operands(out);
                rhs.collect_operands(out);
            }
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().collect(),
            pos: 0,
            text,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn fail(&self, message: &str) -> String {
        format!("{message} at position {} in '{}'", self.pos, self.text)
    }

    fn parse(mut self) -> Result<Expr, String> {
        let expr = self.expr()?;
        self.skip_ws();
        if self.pos != self.chars.len() {
            return Err(self.fail("unexpected trailing input"));
        }
        Ok(expr)
    }

    fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        while let Some(c) = self.peek() {
            let op = match c {
                '+' => Op::Add,
                '-' | '−' => Op::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.factor()?;
        while let Some(c) = self.peek() {
            let op = match c {
                '*' | '×' => Op::Mul,
                '/' | '÷' => Op::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, String> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() == Some(')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(self.fail("expected ')'"))
                }
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_digit())
                {
                    self.pos += 1;
                }
                let digits: String = self.chars[start..self.pos].iter().collect();
                digits
                    .parse::<i64>()
                    .map(Expr::Num)
                    .map_err(|_| self.fail("integer literal out of range"))
            }
            Some(c) => Err(self.fail(&format!("unexpected character '{c}'"))),
            None => Err(self.fail("unexpected end of input")),
        }
    }
}

/// Checker verdict with a diagnostic for rejected expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Game24Verdict {
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// Full verdict; never panics or errors on malformed input.
pub fn game24_check_verdict(numbers: &[i64; 4], expression: &str) -> Game24Verdict {
    let reject = |diag: String| Game24Verdict {
        pass: false,
        diagnostic: Some(diag),
    };
    let expr = match Parser::new(expression.trim()).parse() {
        Ok(e) => e,
        Err(diag) => return reject(diag),
    };
    let mut operands = Vec::with_capacity(4);
    expr.collect_operands(&mut operands);
    operands.sort_unstable();
    let mut expected = *numbers;
    expected.sort_unstable();
    if operands != expected {
        return reject(format!(
            "operand multiset {operands:?} does not match {expected:?}"
        ));
    }
    match expr.eval() {
        Some(value) if value == Rat::from_integer(24) => Game24Verdict {
            pass: true,
            diagnostic: None,
        },
        Some(value) => reject(format!("evaluates to {value}, not 24")),
        None => reject("division by zero".into()),
    }
}

/// 1.0 iff `expression` is a valid 24 witness for `numbers`, else 0.0.
pub fn game24_check(numbers: &[i64; 4], expression: &str) -> f64 {
    if game24_check_verdict(numbers, expression).pass {
        1.0
    } else {
        0.0
    }
}

const PERMS4: [[usize; 4]; 24] = [
    [0, 1, 2, 3],
    [0, 1, 3, 2],
    [0, 2, 1, 3],
    [0, 2, 3, 1],
    [0, 3, 1, 2],
    [0, 3, 2, 1],
    [1, 0, 2, 3],
    [1, 0, 3, 2],
    [1, 2, 0, 3],
    [1, 2, 3, 0],
    [1, 3, 0, 2],
    [1, 3, 2, 0],
    [2, 0, 1, 3],
    [2, 0, 3, 1],
    [2, 1, 0, 3],
    [2, 1, 3, 0],
    [2, 3, 0, 1],
    [2, 3, 1, 0],
    [3, 0, 1, 2],
    [3, 0, 2, 1],
    [3, 1, 0, 2],
    [3, 1, 2, 0],
    [3, 2, 0, 1],
    [3, 2, 1, 0],
];

const OPS: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

/// Exhaustive solver over operand orderings, operator choices, and the five
/// parenthesizations of four operands. Returns a witness accepted by
/// [`game24_check`], or `None` when no solution exists.
pub fn game24_solve(numbers: &[i64; 4]) -> Option<String> {
    let target = Rat::from_integer(24);
    for perm in &PERMS4 {
        let v: Vec<i64> = perm.iter().map(|&i| numbers[i]).collect();
        let r: Vec<Rat> = v.iter().map(|&n| Rat::from_integer(n)).collect();
        for &p in &OPS {
            for &q in &OPS {
                for &s in &OPS {
                    for shape in 0..5 {
                        if let Some(value) = eval_shape(shape, &r, p, q, s) {
                            if value == target {
                                return Some(format_shape(shape, &v, p, q, s));
                            }
                        }
                    }
                }
            }
        }
    }
    None
}

fn apply(op: Op, l: Rat, r: Rat) -> Option<Rat> {
    match op {
        Op::Add => Some(l + r),
        Op::Sub => Some(l - r),
        Op::Mul => Some(l * r),
        Op::Div => {
            if r.is_zero() {
                None
            } else {
                Some(l / r)
            }
        }
    }
}

fn eval_shape(shape: usize, v: &[Rat], p: Op, q: Op, s: Op) -> Option<Rat> {
    let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
    match shape {
        // ((a p b) q c) s d
        0 => apply(s, apply(q, apply(p, a, b)?, c)?, d),
        // (a p (b q c)) s d
        1 => apply(s, apply(p, a, apply(q, b, c)?)?, d),
        // (a p b) q (c s d)
        2 => apply(q, apply(p, a, b)?, apply(s, c, d)?),
        // a p ((b q c) s d)
        3 => apply(p, a, apply(s, apply(q, b, c)?, d)?),
        // a p (b q (c s d))
        _ => apply(p, a, apply(q, b, apply(s, c, d)?)?),
    }
}

fn format_shape(shape: usize, v: &[i64], p: Op, q: Op, s: Op) -> String {
    let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
    let (p, q, s) = (p.symbol(), q.symbol(), s.symbol());
    match shape {
        0 => format!("(({a}{p}{b}){q}{c}){s}{d}"),
        1 => format!("({a}{p}({b}{q}{c})){s}{d}"),
        2 => format!("({a}{p}{b}){q}({c}{s}{d})"),
        3 => format!("{a}{p}(({b}{q}{c}){s}{d})"),
        _ => format!("{a}{p}({b}{q}({c}{s}{d}))"),
    }
}
