//! Element symbols indexed by atomic number.

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

pub const MAX_Z: u32 = 118;

/// Atomic number for a symbol. POSCAR files sometimes carry suffixes such as
/// `Fe_pv` or `O_s`; everything after the first `_` or `/` is ignored.
pub fn atomic_number(symbol: &str) -> Option<u32> {
    let base = symbol.split(['_', '/']).next().unwrap_or("");
    SYMBOLS
        .iter()
        .position(|s| *s == base)
        .map(|i| i as u32 + 1)
}

pub fn symbol(z: u32) -> Option<&'static str> {
    if (1..=MAX_Z).contains(&z) {
        Some(SYMBOLS[(z - 1) as usize])
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_both_ways() {
        assert_eq!(atomic_number("H"), Some(1));
        assert_eq!(atomic_number("Ca"), Some(20));
        assert_eq!(atomic_number("Og"), Some(118));
        assert_eq!(atomic_number("Fe_pv"), Some(26));
        assert_eq!(atomic_number("Xx"), None);
        assert_eq!(symbol(22), Some("Ti"));
        assert_eq!(symbol(0), None);
        for z in 1..=MAX_Z {
            assert_eq!(atomic_number(symbol(z).unwrap()), Some(z));
        }
    }
}
