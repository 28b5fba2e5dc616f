//! JSON form of named queries:
//! `{"free":[..], "exists":[..], "literals":[{"rel", "args":[{"var":n}|{"const":n}], "neg", "clause"?}]}`.
//! Clause literals carry `"rel": "OR"`, the union of body terms as `args`,
//! and the body under `"clause"`.

use serde::{Deserialize, Serialize};

use super::{ConjunctiveQuery, DnfQuery, Literal, LiteralKind, NamedDnf, NamedQuery, QueryError, Term, VarId};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum JsonTerm {
    Var(String),
    Const(String),
}

#[derive(Serialize, Deserialize)]
struct JsonLiteral {
    rel: String,
    args: Vec<JsonTerm>,
    #[serde(default)]
    neg: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    clause: Option<Vec<JsonLiteral>>,
}

#[derive(Serialize, Deserialize)]
struct JsonQuery {
    free: Vec<String>,
    exists: Vec<String>,
    literals: Vec<JsonLiteral>,
}

#[derive(Serialize, Deserialize)]
struct JsonDnf {
    disjuncts: Vec<JsonQuery>,
}

#[derive(Debug, thiserror::Error)]
pub enum JsonQueryError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("atomic literal must have 2 arguments")]
    Arity,
}

fn literal_to_json(q: &NamedQuery, lit: &Literal<String, String>) -> JsonLiteral {
    let term = |t: &Term<String>| match t {
        Term::Var(v) => JsonTerm::Var(q.var_name(*v).to_owned()),
        Term::Const(c) => JsonTerm::Const(c.clone()),
    };
    match &lit.kind {
        LiteralKind::Atom { rel, args } => JsonLiteral {
            rel: rel.clone(),
            args: args.iter().map(term).collect(),
            neg: lit.negated,
            clause: None,
        },
        LiteralKind::Clause(body) => JsonLiteral {
            rel: "OR".into(),
            args: lit.terms().iter().map(term).collect(),
            neg: false,
            clause: Some(body.iter().map(|b| literal_to_json(q, b)).collect()),
        },
    }
}

fn query_to_value(q: &NamedQuery) -> JsonQuery {
    JsonQuery {
        free: q.free.iter().map(|v| q.var_name(*v).to_owned()).collect(),
        exists: q.exists.iter().map(|v| q.var_name(*v).to_owned()).collect(),
        literals: q.literals.iter().map(|l| literal_to_json(q, l)).collect(),
    }
}

fn literal_from_json(names: &[String], lit: JsonLiteral) -> Result<Literal<String, String>, JsonQueryError> {
    if let Some(body) = lit.clause {
        let body = body
            .into_iter()
            .map(|b| literal_from_json(names, b))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Literal {
            kind: LiteralKind::Clause(body),
            negated: lit.neg,
        });
    }
    let term = |t: JsonTerm| match t {
        JsonTerm::Const(c) => Ok(Term::Const(c)),
        JsonTerm::Var(n) => names
            .iter()
            .position(|m| *m == n)
            .map(|i| Term::Var(VarId(i as u32)))
            .ok_or(JsonQueryError::UnknownVariable(n)),
    };
    let mut args = lit.args.into_iter().map(term).collect::<Result<Vec<_>, _>>()?;
    if args.len() != 2 {
        return Err(JsonQueryError::Arity);
    }
    let tail = args.pop().expect("len 2");
    let head = args.pop().expect("len 2");
    Ok(Literal {
        kind: LiteralKind::Atom {
            rel: lit.rel,
            args: [head, tail],
        },
        negated: lit.neg,
    })
}

fn query_from_value(v: JsonQuery) -> Result<NamedQuery, JsonQueryError> {
    let names: Vec<String> = v.free.iter().chain(&v.exists).cloned().collect();
    let literals = v
        .literals
        .into_iter()
        .map(|l| literal_from_json(&names, l))
        .collect::<Result<Vec<_>, _>>()?;
    let q = ConjunctiveQuery {
        free: (0..v.free.len() as u32).map(VarId).collect(),
        exists: (v.free.len() as u32..names.len() as u32).map(VarId).collect(),
        var_names: names,
        literals,
    };
    q.validate()?;
    Ok(q)
}

pub fn query_to_json(q: &NamedQuery) -> serde_json::Value {
    serde_json::to_value(query_to_value(q)).expect("plain data")
}

pub fn query_from_json(v: &serde_json::Value) -> Result<NamedQuery, JsonQueryError> {
    query_from_value(JsonQuery::deserialize(v)?)
}

pub fn dnf_to_json(q: &NamedDnf) -> serde_json::Value {
    let d = JsonDnf {
        disjuncts: q.disjuncts.iter().map(query_to_value).collect(),
    };
    serde_json::to_value(d).expect("plain data")
}

pub fn dnf_from_json(v: &serde_json::Value) -> Result<NamedDnf, JsonQueryError> {
    let d = JsonDnf::deserialize(v)?;
    let disjuncts = d
        .disjuncts
        .into_iter()
        .map(query_from_value)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DnfQuery::new(disjuncts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;

    #[test]
    fn json_shape_and_round_trip() {
        let q = parse_query("Q(x) := EXISTS y . r(x,y) & !s(y,c:a) & OR{ t(x,c:b) ; !u(y,x) }").unwrap();
        let d = &q.disjuncts[0];
        let v = query_to_json(d);
        assert_eq!(v["free"], serde_json::json!(["x"]));
        assert_eq!(v["literals"][1]["neg"], serde_json::json!(true));
        assert_eq!(v["literals"][1]["args"][1], serde_json::json!({"const": "a"}));
        assert_eq!(v["literals"][2]["rel"], serde_json::json!("OR"));
        assert_eq!(v["literals"][2]["args"].as_array().unwrap().len(), 3);
        assert_eq!(&query_from_json(&v).unwrap(), d);

        let dv = dnf_to_json(&q);
        assert_eq!(dnf_from_json(&dv).unwrap(), q);
    }
}
