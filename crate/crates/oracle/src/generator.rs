//! Seeded generator of well-formed programs for property tests.

use gaussi::lang::unroll::Action;
use gaussi::lang::Program;
use gaussi::{parse, ArithOp};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::noise_basis::NoiseBasisModel;

/// Minimum variance of a conditioned variable.
pub const MIN_CONDITION_VARIANCE: f64 = 0.05;

#[derive(Debug, Clone)]
struct Live {
    /// Source spelling (`X3` or `A1[2]`).
    source: String,
    /// Flat name in the state (`X3` or `A1_2`).
    flat: String,
}

struct Gen {
    rng: ChaCha8Rng,
    src: String,
    model: NoiseBasisModel,
    live: Vec<Live>,
    det: Vec<(String, f64)>,
    made: usize,
    conditions: usize,
    next_id: usize,
}

fn num(v: f64) -> String {
    if v < 0.0 {
        format!("({v})")
    } else {
        format!("{v}")
    }
}

impl Gen {
    fn constant(&mut self) -> f64 {
        (self.rng.gen_range(-10.0..=10.0f64) * 1000.0).round() / 1000.0
    }

    fn variance(&mut self) -> f64 {
        (self.rng.gen_range(0.1..=10.0f64) * 1000.0).round() / 1000.0
    }

    fn divisor(&mut self) -> f64 {
        let v = (self.rng.gen_range(0.5..=10.0f64) * 1000.0).round() / 1000.0;
        if self.rng.gen_bool(0.5) {
            v
        } else {
            -v
        }
    }

    fn fresh_name(&mut self, prefix: &str) -> String {
        self.next_id += 1;
        format!("{prefix}{}", self.next_id)
    }

    fn apply(&mut self, action: Action) {
        self.model.apply(&action).expect("generated action is valid");
    }

    fn pick(&mut self) -> Live {
        self.live.choose(&mut self.rng).expect("a live variable").clone()
    }

    /// A deterministic expression with value `v`, sometimes routed through
    /// a deterministic variable.
    fn det_expr(&mut self, v: f64) -> (String, f64) {
        if !self.det.is_empty() && self.rng.gen_bool(0.3) {
            let (name, k) = self.det.choose(&mut self.rng).unwrap().clone();
            let c = self.constant();
            return (format!("{name} + {}", num(c)), k + c);
        }
        (num(v), v)
    }

    fn independent(&mut self) {
        let name = self.fresh_name("X");
        let m = self.constant();
        let (mean_src, mean) = self.det_expr(m);
        let var = self.variance();
        self.src.push_str(&format!("{name} = Normal({mean_src}, {var})\n"));
        self.apply(Action::Independent {
            target: name.clone(),
            mean,
            variance: var,
        });
        self.push_live(name.clone(), name);
    }

    fn push_live(&mut self, source: String, flat: String) {
        self.made += 1;
        self.live.push(Live { source, flat });
    }

    fn linear(&mut self) {
        let dep = self.pick();
        let name = self.fresh_name("X");
        let var = self.variance();
        let (coeff, offset, text) = match self.rng.gen_range(0..3) {
            0 => (1.0, 0.0, dep.source.clone()),
            1 => {
                let a = self.constant();
                (a, 0.0, format!("{} * {}", dep.source, num(a)))
            }
            _ => {
                let a = self.constant();
                let b = self.constant();
                let sign = if b < 0.0 { "-" } else { "+" };
                (a, b, format!("{} * {} {sign} {}", num(a), dep.source, b.abs()))
            }
        };
        self.src.push_str(&format!("{name} = Normal({text}, {var})\n"));
        self.apply(Action::Linear {
            target: name.clone(),
            coeff,
            dep: dep.flat,
            offset,
            variance: var,
        });
        self.push_live(name.clone(), name);
    }

    fn op_assign(&mut self) {
        let src = self.pick();
        let name = self.fresh_name("X");
        let form = self.rng.gen_range(0..6);
        let (op, operand, text) = match form {
            0 => {
                let c = self.constant();
                (ArithOp::Add, c, format!("{} + {}", src.source, num(c)))
            }
            1 => {
                let c = self.constant();
                (ArithOp::Sub, c, format!("{} - {}", src.source, num(c)))
            }
            2 => {
                let c = self.constant();
                let (t, v) = self.det_expr(c);
                (ArithOp::Mul, v, format!("{} * ({t})", src.source))
            }
            3 => {
                let c = self.divisor();
                (ArithOp::Div, c, format!("{} / {}", src.source, num(c)))
            }
            4 => {
                let c = self.constant();
                (ArithOp::Add, c, format!("{} + {}", num(c), src.source))
            }
            _ => {
                let c = self.constant();
                (ArithOp::Mul, c, format!("{} * {}", num(c), src.source))
            }
        };
        self.src.push_str(&format!("{name} = {text}\n"));
        self.apply(Action::ShiftScale {
            target: name.clone(),
            src: src.flat,
            op,
            operand,
        });
        self.push_live(name.clone(), name);
    }

    fn sum(&mut self) {
        let a = self.pick();
        let b = self.pick();
        let name = self.fresh_name("X");
        self.src.push_str(&format!("{name} = {} + {}\n", a.source, b.source));
        self.apply(Action::Sum {
            target: name.clone(),
            lhs: a.flat,
            rhs: b.flat,
        });
        self.push_live(name.clone(), name);
    }

    fn det_assign(&mut self) {
        let name = self.fresh_name("k");
        let v = self.constant();
        self.src.push_str(&format!("{name} = {v}\n"));
        self.det.push((name, v));
    }

    fn for_loop(&mut self, budget: usize) {
        let base = self.fresh_name("A");
        let m = self.rng.gen_range(2..=budget.min(4));
        let var = self.variance();
        if self.rng.gen_bool(0.5) {
            let c = self.constant();
            let d = self.constant();
            self.src.push_str(&format!(
                "for i in range({m}):\n    {base}[i] = Normal({} * i + {}, {var})\n",
                num(c),
                num(d)
            ));
            for i in 0..m {
                let flat = format!("{base}_{i}");
                self.apply(Action::Independent {
                    target: flat.clone(),
                    mean: c * i as f64 + d,
                    variance: var,
                });
                self.push_live(format!("{base}[{i}]"), flat);
            }
        } else {
            let c0 = self.constant();
            let a = (self.rng.gen_range(-1.5..=1.5f64) * 1000.0).round() / 1000.0;
            let b = self.constant();
            self.src.push_str(&format!("{base}[0] = Normal({}, {var})\n", num(c0)));
            self.src.push_str(&format!(
                "for i in range({}):\n    {base}[i + 1] = Normal({} * {base}[i] + {}, {var})\n",
                m - 1,
                num(a),
                num(b)
            ));
            self.apply(Action::Independent {
                target: format!("{base}_0"),
                mean: c0,
                variance: var,
            });
            self.push_live(format!("{base}[0]"), format!("{base}_0"));
            for i in 1..m {
                let flat = format!("{base}_{i}");
                self.apply(Action::Linear {
                    target: flat.clone(),
                    coeff: a,
                    dep: format!("{base}_{}", i - 1),
                    offset: b,
                    variance: var,
                });
                self.push_live(format!("{base}[{i}]"), flat);
            }
        }
    }

    /// Conditions on a live variable with enough variance, at a value near
    /// its current mean. Returns false if no candidate exists.
    fn condition(&mut self) -> bool {
        let candidates: Vec<usize> = (0..self.live.len())
            .filter(|&i| self.model.variance(&self.live[i].flat).unwrap() >= MIN_CONDITION_VARIANCE)
            .collect();
        let Some(&i) = candidates.choose(&mut self.rng) else {
            return false;
        };
        let target = self.live.remove(i);
        let mean = self.model.mean(&target.flat).unwrap();
        let sd = self.model.variance(&target.flat).unwrap().sqrt();
        let z = self.rng.gen_range(-1.5..=1.5f64);
        let value = ((mean + z * sd) * 1000.0).round() / 1000.0;
        let spelled = if self.rng.gen_bool(0.2) && !target.source.contains('[') {
            format!("\"{}\"", target.source)
        } else {
            target.source.clone()
        };
        self.src.push_str(&format!("condition({spelled}, {})\n", num(value)));
        self.apply(Action::Condition {
            target: target.flat,
            value,
        });
        self.conditions += 1;
        true
    }
}

/// Source text of a random program with at most `max_vars` random
/// variables and at most `max_conditions` conditions.
pub fn random_source(seed: u64, max_vars: usize, max_conditions: usize) -> String {
    assert!(max_vars >= 1, "max_vars must be at least 1");
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        src: String::new(),
        model: NoiseBasisModel::new(),
        live: Vec::new(),
        det: Vec::new(),
        made: 0,
        conditions: 0,
        next_id: 0,
    };
    let target_vars = g.rng.gen_range(1..=max_vars);
    let target_conditions = g.rng.gen_range(0..=max_conditions);
    let mut det_assigns = 0;
    g.independent();
    while g.made < target_vars {
        let budget = target_vars - g.made;
        let can_condition = g.conditions < target_conditions && g.live.len() >= 2;
        match g.rng.gen_range(0..100) {
            0..=14 => g.independent(),
            15..=34 => g.linear(),
            35..=54 => g.op_assign(),
            55..=69 => g.sum(),
            70..=77 if det_assigns < 2 => {
                det_assigns += 1;
                g.det_assign();
            }
            78..=87 if budget >= 2 => g.for_loop(budget),
            88..=99 if can_condition => {
                g.condition();
            }
            _ => g.independent(),
        }
    }
    while g.conditions < target_conditions && g.live.len() >= 2 {
        if !g.condition() {
            break;
        }
    }
    let k = g.rng.gen_range(1..=g.live.len().min(3));
    let mut picks: Vec<Live> = g.live.choose_multiple(&mut g.rng, k).cloned().collect();
    picks.sort_by(|a, b| a.flat.cmp(&b.flat));
    let names: Vec<String> = picks.into_iter().map(|l| l.source).collect();
    g.src.push_str(&format!("return {}\n", names.join(", ")));
    g.src
}

pub fn random_program(seed: u64, max_vars: usize, max_conditions: usize) -> Program {
    let src = random_source(seed, max_vars, max_conditions);
    parse(&src).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{src}"))
}

/// Base seed for property tests: `GAUSSI_SEED` if set, else `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var("GAUSSI_SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}
