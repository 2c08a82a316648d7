//! Arithmetic expressions in config values, e.g. `sin(pi*y)^2`.

use std::sync::Mutex;

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes, Function,
    HashMapContext, Node, Value,
};

pub struct Expr {
    node: Node<DefaultNumericTypes>,
    ctx: Mutex<HashMapContext<DefaultNumericTypes>>,
    vars: Vec<&'static str>,
}

fn unary(f: fn(f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |a: &Value<DefaultNumericTypes>| Ok(Value::Float(f(a.as_number()?))))
}

impl Expr {
    /// `vars` are the free variables; every other identifier must be one of
    /// the registered functions or `pi`.
    pub fn parse(text: &str, vars: &[&'static str]) -> Result<Self, String> {
        let node = build_operator_tree::<DefaultNumericTypes>(text).map_err(|e| format!("cannot parse `{text}`: {e}"))?;
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        let funcs: [(&str, fn(f64) -> f64); 8] = [
            ("sin", f64::sin),
            ("cos", f64::cos),
            ("tan", f64::tan),
            ("exp", f64::exp),
            ("ln", f64::ln),
            ("sqrt", f64::sqrt),
            ("abs", f64::abs),
            ("floor", f64::floor),
        ];
        for (name, f) in funcs {
            ctx.set_function(name.to_string(), unary(f)).map_err(|e| e.to_string())?;
        }
        ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))
            .map_err(|e| e.to_string())?;
        for v in vars {
            ctx.set_value(v.to_string(), Value::Float(0.0)).map_err(|e| e.to_string())?;
        }
        let e = Expr {
            node,
            ctx: Mutex::new(ctx),
            vars: vars.to_vec(),
        };
        e.eval(&vec![0.0; vars.len()])?;
        Ok(e)
    }

    pub fn eval(&self, values: &[f64]) -> Result<f64, String> {
        let mut ctx = self.ctx.lock().expect("expression context poisoned");
        for (name, &x) in self.vars.iter().zip(values) {
            ctx.set_value(name.to_string(), Value::Float(x)).map_err(|e| e.to_string())?;
        }
        self.node.eval_number_with_context(&*ctx).map_err(|e| e.to_string())
    }
}
