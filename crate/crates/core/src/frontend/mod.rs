//! MiniSol front end: parsing, name resolution, CFG construction and the
//! static attributes used to build producer prompts.

pub mod analysis;
pub mod ast;
pub mod cfg;
mod error;
mod lexer;
mod parser;
mod printer;
mod resolve;

pub use analysis::{dependency_closure, summarize, ClosureMember, StaticSummary};
pub use ast::*;
pub use cfg::{build_cfg, cyclomatic, neighbors, BasicBlock, BlockKind, Branch, Cfg, UnknownBlock};
pub use error::{FrontendError, Loc};

pub(crate) use resolve::loc_of;

/// Parses a single source text named `<input>`.
pub fn parse(source: &str) -> Result<SourceUnit, FrontendError> {
    parse_files(&[("<input>", source)])
}

/// Parses several files into one unit; contracts may call across files.
pub fn parse_files<S: AsRef<str>>(files: &[(S, S)]) -> Result<SourceUnit, FrontendError> {
    let mut unit = SourceUnit {
        files: Vec::new(),
        contracts: Vec::new(),
    };
    for (i, (name, text)) in files.iter().enumerate() {
        let contracts = parser::parse_file(i, name.as_ref(), text.as_ref())?;
        unit.files.push(SourceFile {
            name: name.as_ref().to_string(),
            text: text.as_ref().to_string(),
        });
        unit.contracts.extend(contracts);
    }
    resolve::resolve(&mut unit)?;
    Ok(unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_contract() {
        let unit = parse("contract A { }").unwrap();
        assert_eq!(unit.contracts.len(), 1);
        assert!(unit.contracts[0].functions.is_empty());
    }

    #[test]
    fn function_span_is_verbatim() {
        let src = "contract A {\n  uint x;\n  function f(uint v) public { x = v; }\n}\n";
        let unit = parse(src).unwrap();
        assert_eq!(unit.function_source(FuncId(0)), "function f(uint v) public { x = v; }");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse("contract A {\n  uint x\n}").unwrap_err();
        assert_eq!(
            err.to_string(),
            "<input>:3:1: syntax error: expected `;`, found `}`"
        );
    }

    #[test]
    fn unknown_identifier_is_named() {
        let err = parse("contract A { function f() public { y = 1; } }").unwrap_err();
        assert!(matches!(err, FrontendError::UnknownIdentifier { ref name, .. } if name == "y"));
    }

    #[test]
    fn unknown_callee_and_contract() {
        let err = parse("contract A { function f() public { g(); } }").unwrap_err();
        assert!(matches!(err, FrontendError::UnknownFunction { .. }));
        let err = parse("contract A { function f() public { B.g(); } }").unwrap_err();
        assert!(matches!(err, FrontendError::UnknownContract { .. }));
    }

    #[test]
    fn duplicates_are_rejected() {
        assert!(matches!(
            parse("contract A { } contract A { }"),
            Err(FrontendError::Duplicate { .. })
        ));
        assert!(matches!(
            parse("contract A { uint x; bool x; }"),
            Err(FrontendError::Duplicate { .. })
        ));
    }

    #[test]
    fn type_errors() {
        for bad in [
            "contract A { uint x; function f() public { x = true; } }",
            "contract A { bool b; function f() public { require(b + 1 > 0); } }",
            "contract A { map(address => uint) m; function f() public { m[1] = 2; } }",
            "contract A { function f(uint v) public { g(v, v); } function g(uint a) internal { } }",
            "contract A { function f() public { B.g(); } } contract B { function g() internal { } }",
        ] {
            assert!(
                matches!(parse(bad), Err(FrontendError::Type { .. })),
                "accepted: {bad}"
            );
        }
    }

    #[test]
    fn locals_are_block_scoped() {
        let err = parse(
            "contract A { uint x; function f(uint v) public { if (v > 1) { uint t = v; } x = t; } }",
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::UnknownIdentifier { ref name, .. } if name == "t"));
    }

    #[test]
    fn qualified_signatures_only_on_clash() {
        let unit = parse(
            "contract A { function f() public { } function g() public { } }
             contract B { function f() public { } }",
        )
        .unwrap();
        assert_eq!(unit.display_signature(FuncId(0)), "A.f()");
        assert_eq!(unit.display_signature(FuncId(1)), "g()");
        assert_eq!(unit.display_signature(FuncId(2)), "B.f()");
        assert_eq!(unit.lookup_signature("B.f()"), Some(FuncId(2)));
        assert_eq!(unit.lookup_signature("f()"), None);
        assert_eq!(unit.lookup_signature(" g ( ) "), Some(FuncId(1)));
    }

    #[test]
    fn print_then_parse_is_a_fixpoint() {
        let src = "contract A { uint x; bool on; map(address => uint) m;
            function f(uint v, address a) public {
                uint t = (v + 1) * 2 - x / 3;
                if (!on && (t > 5 || a == msg.sender)) { m[a] = m[a] + msg.value; }
                else if (v == 0) { bug(7); } else { assert(x != 2); }
                require(a != address(0));
                g(t);
            }
            function g(uint w) internal { x = w % 5; }
        }";
        let first = parse(src).unwrap();
        let printed = first.to_string();
        let second = parse(&printed).unwrap();
        assert_eq!(first.without_spans(), second.without_spans());
        assert_eq!(printed, second.to_string());
    }
}
