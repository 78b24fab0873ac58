use std::collections::BTreeMap;
use std::fmt;

/// Grassmann parity of a symbol or a homogeneous expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity of a product: mod-2 sum of the factor parities.
    pub fn combine(self, other: Parity) -> Parity {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolRole {
    BaseCoordinate,
    Field,
    Ghost,
    FieldAntifield,
    NoetherAntifield,
    Constant,
}

impl SymbolRole {
    pub fn is_antifield(self) -> bool {
        matches!(self, SymbolRole::FieldAntifield | SymbolRole::NoetherAntifield)
    }

    /// Base coordinates and constants never carry jets.
    pub fn carries_jets(self) -> bool {
        !matches!(self, SymbolRole::BaseCoordinate | SymbolRole::Constant)
    }
}

/// A declared symbol of the graded jet algebra.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolDecl {
    pub name: String,
    pub role: SymbolRole,
    pub parity: Parity,
    pub ghost_number: i64,
    pub antifield_number: u32,
    /// Reducibility stage; -1 for fields and field-antifields.
    pub stage: i64,
}

impl SymbolDecl {
    pub fn base_coordinate(name: impl Into<String>) -> Self {
        SymbolDecl {
            name: name.into(),
            role: SymbolRole::BaseCoordinate,
            parity: Parity::Even,
            ghost_number: 0,
            antifield_number: 0,
            stage: -1,
        }
    }

    pub fn field(name: impl Into<String>, parity: Parity) -> Self {
        SymbolDecl {
            name: name.into(),
            role: SymbolRole::Field,
            parity,
            ghost_number: 0,
            antifield_number: 0,
            stage: -1,
        }
    }

    /// Stage-k ghost: ghost number k+1.
    pub fn ghost(name: impl Into<String>, parity: Parity, stage: i64) -> Self {
        SymbolDecl {
            name: name.into(),
            role: SymbolRole::Ghost,
            parity,
            ghost_number: stage + 1,
            antifield_number: 0,
            stage,
        }
    }

    /// Antifield paired with a field: antifield number 1, ghost number -1.
    pub fn field_antifield(name: impl Into<String>, parity: Parity) -> Self {
        SymbolDecl {
            name: name.into(),
            role: SymbolRole::FieldAntifield,
            parity,
            ghost_number: -1,
            antifield_number: 1,
            stage: -1,
        }
    }

    /// Stage-k Noether antifield: antifield number k+2, ghost number -(k+2).
    pub fn noether_antifield(name: impl Into<String>, parity: Parity, stage: i64) -> Self {
        SymbolDecl {
            name: name.into(),
            role: SymbolRole::NoetherAntifield,
            parity,
            ghost_number: -(stage + 2),
            antifield_number: (stage + 2) as u32,
            stage,
        }
    }

    pub fn constant(name: impl Into<String>) -> Self {
        SymbolDecl {
            name: name.into(),
            role: SymbolRole::Constant,
            parity: Parity::Even,
            ghost_number: 0,
            antifield_number: 0,
            stage: -1,
        }
    }
}

/// Identifier of a declared symbol; the numeric value is the declaration
/// order, which is also the canonical factor order of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

/// Declaration table shared by all expressions of one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<SymbolDecl>,
    by_name: BTreeMap<String, SymbolId>,
    base_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeclError {
    DuplicateName(String),
    InvalidDecl(String),
}

impl fmt::Display for DeclError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeclError::DuplicateName(n) => write!(f, "duplicate symbol name `{n}`"),
            DeclError::InvalidDecl(m) => write!(f, "invalid declaration: {m}"),
        }
    }
}

impl std::error::Error for DeclError {}

impl SymbolTable {
    /// A table with base coordinates `x0..x(n-1)` already declared.
    pub fn with_base_dim(n: usize) -> Self {
        let mut t = SymbolTable {
            symbols: Vec::new(),
            by_name: BTreeMap::new(),
            base_dim: n,
        };
        for lam in 0..n {
            t.declare(SymbolDecl::base_coordinate(format!("x{lam}"))).unwrap();
        }
        t
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn declare(&mut self, decl: SymbolDecl) -> Result<SymbolId, DeclError> {
        if self.by_name.contains_key(&decl.name) {
            return Err(DeclError::DuplicateName(decl.name));
        }
        self.validate(&decl)?;
        let id = SymbolId(self.symbols.len() as u32);
        self.by_name.insert(decl.name.clone(), id);
        self.symbols.push(decl);
        Ok(id)
    }

    fn validate(&self, decl: &SymbolDecl) -> Result<(), DeclError> {
        let bad = |m: &str| Err(DeclError::InvalidDecl(format!("`{}`: {m}", decl.name)));
        match decl.role {
            SymbolRole::BaseCoordinate | SymbolRole::Constant => {
                if decl.parity != Parity::Even || decl.ghost_number != 0 || decl.antifield_number != 0 {
                    return bad("base coordinates and constants are even with zero gradings");
                }
            }
            SymbolRole::Field => {
                if decl.ghost_number != 0 || decl.antifield_number != 0 || decl.stage != -1 {
                    return bad("fields carry ghost number 0, antifield number 0, stage -1");
                }
            }
            SymbolRole::Ghost => {
                if decl.stage < 0 || decl.ghost_number != decl.stage + 1 {
                    return bad("stage-k ghosts have ghost number k+1");
                }
            }
            SymbolRole::FieldAntifield => {
                if decl.antifield_number != 1 || decl.ghost_number != -1 || decl.stage != -1 {
                    return bad("field-antifields have antifield number 1 and ghost number -1");
                }
            }
            SymbolRole::NoetherAntifield => {
                if decl.stage < 0
                    || decl.antifield_number as i64 != decl.stage + 2
                    || decl.ghost_number != -(decl.stage + 2)
                {
                    return bad("stage-k Noether antifields have antifield number k+2");
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, id: SymbolId) -> &SymbolDecl {
        &self.symbols[id.0 as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.by_name.get(name).copied()
    }

    pub fn parity(&self, id: SymbolId) -> Parity {
        self.get(id).parity
    }

    pub fn role(&self, id: SymbolId) -> SymbolRole {
        self.get(id).role
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        (0..self.symbols.len() as u32).map(SymbolId)
    }

    /// Symbols that generate the graded algebra over the base: everything
    /// except base coordinates and constants.
    pub fn generator_ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.ids().filter(|id| self.role(*id).carries_jets())
    }
}
