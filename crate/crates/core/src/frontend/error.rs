use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Loc {
    pub file: String,
    pub line: usize,
    pub col: usize,
}

impl Loc {
    pub fn new(file: &str, line: usize, col: usize) -> Self {
        Loc {
            file: file.to_string(),
            line,
            col,
        }
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum FrontendError {
    #[error("{loc}: syntax error: {message}")]
    Syntax { loc: Loc, message: String },
    #[error("{loc}: unknown identifier `{name}`")]
    UnknownIdentifier { loc: Loc, name: String },
    #[error("{loc}: unknown function `{name}`")]
    UnknownFunction { loc: Loc, name: String },
    #[error("{loc}: unknown contract `{name}`")]
    UnknownContract { loc: Loc, name: String },
    #[error("{loc}: duplicate declaration `{name}`")]
    Duplicate { loc: Loc, name: String },
    #[error("{loc}: type error: {message}")]
    Type { loc: Loc, message: String },
}
