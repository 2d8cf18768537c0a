//! Tokenizer for the `.ppv` surface syntax. `#` comments run to end of line.

use crate::error::{CoreError, Pos};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(BigRational),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Comma,
    Colon,
    ColonColon,
    Dot,
    Semi,
    Arrow,     // ->
    FatArrow,  // =>
    Iff,       // <->
    Wedge,     // /\
    Tilde,     // ~
    Plus,
    Minus,
    Star,
    Slash,
    AmpAmp,
    BarBar,
    Bar,
    Tensor, // (*)
    At,     // @
    Assign, // := in proof scripts
    Eof,
}

#[derive(Debug, Clone)]
pub struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(src: &str) -> Result<Vec<Spanned>, CoreError> {
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut out = Vec::new();

    macro_rules! push {
        ($t:expr) => {
            out.push(Spanned {
                tok: $t,
                pos: Pos { line, col },
            })
        };
    }

    while i < bytes.len() {
        let c = bytes[i];
        let advance = |i: &mut usize, col: &mut u32, n: usize| {
            *i += n;
            *col += n as u32;
        };
        match c {
            ' ' | '\t' | '\r' => {
                advance(&mut i, &mut col, 1);
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            '"' => {
                let start = Pos { line, col };
                let mut s = String::new();
                let mut j = i + 1;
                loop {
                    if j >= bytes.len() {
                        return Err(CoreError::parse(start, "unterminated string literal"));
                    }
                    if bytes[j] == '"' {
                        break;
                    }
                    s.push(bytes[j]);
                    j += 1;
                }
                out.push(Spanned {
                    tok: Tok::Str(s),
                    pos: start,
                });
                let n = j + 1 - i;
                advance(&mut i, &mut col, n);
            }
            '(' => {
                // `(*)` is the product-measure operator.
                if i + 2 < bytes.len() && bytes[i + 1] == '*' && bytes[i + 2] == ')' {
                    push!(Tok::Tensor);
                    advance(&mut i, &mut col, 3);
                } else {
                    push!(Tok::LParen);
                    advance(&mut i, &mut col, 1);
                }
            }
            ')' => {
                push!(Tok::RParen);
                advance(&mut i, &mut col, 1);
            }
            '[' => {
                push!(Tok::LBracket);
                advance(&mut i, &mut col, 1);
            }
            ']' => {
                push!(Tok::RBracket);
                advance(&mut i, &mut col, 1);
            }
            '{' => {
                push!(Tok::LBrace);
                advance(&mut i, &mut col, 1);
            }
            '}' => {
                push!(Tok::RBrace);
                advance(&mut i, &mut col, 1);
            }
            ',' => {
                push!(Tok::Comma);
                advance(&mut i, &mut col, 1);
            }
            ';' => {
                push!(Tok::Semi);
                advance(&mut i, &mut col, 1);
            }
            '.' => {
                if i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit() {
                    let (tok, n) = lex_number(&bytes[i..]);
                    push!(tok);
                    advance(&mut i, &mut col, n);
                } else {
                    push!(Tok::Dot);
                    advance(&mut i, &mut col, 1);
                }
            }
            '@' => {
                push!(Tok::At);
                advance(&mut i, &mut col, 1);
            }
            '~' => {
                push!(Tok::Tilde);
                advance(&mut i, &mut col, 1);
            }
            '+' => {
                push!(Tok::Plus);
                advance(&mut i, &mut col, 1);
            }
            '*' => {
                push!(Tok::Star);
                advance(&mut i, &mut col, 1);
            }
            '|' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '|' {
                    push!(Tok::BarBar);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Bar);
                    advance(&mut i, &mut col, 1);
                }
            }
            '&' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '&' {
                    push!(Tok::AmpAmp);
                    advance(&mut i, &mut col, 2);
                } else {
                    return Err(CoreError::parse(Pos { line, col }, "stray '&'"));
                }
            }
            '/' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '\\' {
                    push!(Tok::Wedge);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Slash);
                    advance(&mut i, &mut col, 1);
                }
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    push!(Tok::Arrow);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Minus);
                    advance(&mut i, &mut col, 1);
                }
            }
            '=' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    push!(Tok::FatArrow);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Eq);
                    advance(&mut i, &mut col, 1);
                }
            }
            '<' => {
                if i + 2 < bytes.len() && bytes[i + 1] == '-' && bytes[i + 2] == '>' {
                    push!(Tok::Iff);
                    advance(&mut i, &mut col, 3);
                } else if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Le);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Lt);
                    advance(&mut i, &mut col, 1);
                }
            }
            '>' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Ge);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Gt);
                    advance(&mut i, &mut col, 1);
                }
            }
            ':' => {
                if i + 1 < bytes.len() && bytes[i + 1] == ':' {
                    push!(Tok::ColonColon);
                    advance(&mut i, &mut col, 2);
                } else if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push!(Tok::Assign);
                    advance(&mut i, &mut col, 2);
                } else {
                    push!(Tok::Colon);
                    advance(&mut i, &mut col, 1);
                }
            }
            c if c.is_ascii_digit() => {
                let (tok, n) = lex_number(&bytes[i..]);
                push!(tok);
                advance(&mut i, &mut col, n);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == '_' || bytes[j] == '\'')
                {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().collect();
                push!(Tok::Ident(s));
                let n = j - i;
                advance(&mut i, &mut col, n);
            }
            other => {
                return Err(CoreError::parse(
                    Pos { line, col },
                    format!("unexpected character {other:?}"),
                ));
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

/// Decimal literals become exact rationals: `0.5` is 1/2.
fn lex_number(cs: &[char]) -> (Tok, usize) {
    let mut j = 0;
    let mut int_part = String::new();
    while j < cs.len() && cs[j].is_ascii_digit() {
        int_part.push(cs[j]);
        j += 1;
    }
    let mut frac_part = String::new();
    if j < cs.len() && cs[j] == '.' && j + 1 < cs.len() && cs[j + 1].is_ascii_digit() {
        j += 1;
        while j < cs.len() && cs[j].is_ascii_digit() {
            frac_part.push(cs[j]);
            j += 1;
        }
    }
    let int_v: BigInt = if int_part.is_empty() {
        BigInt::from(0)
    } else {
        int_part.parse().expect("digits")
    };
    let mut value = BigRational::from(int_v);
    if !frac_part.is_empty() {
        let num: BigInt = frac_part.parse().expect("digits");
        let mut den = BigInt::one();
        for _ in 0..frac_part.len() {
            den *= 10;
        }
        value += BigRational::new(num, den);
    }
    (Tok::Number(value), j)
}
