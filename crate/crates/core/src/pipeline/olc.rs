//! Open Location Code (plus code) encoder.

const ALPHABET: &[u8; 20] = b"23456789CFGHJMPQRVWX";
const SEPARATOR: char = '+';
const SEPARATOR_POSITION: usize = 8;
const PAIR_CODE_LENGTH: usize = 10;
const GRID_CODE_LENGTH: u32 = 5;
const MAX_DIGIT_COUNT: usize = 15;
const GRID_ROWS: i64 = 5;
const GRID_COLUMNS: i64 = 4;
const ENCODING_BASE: i64 = 20;
const LAT_MAX: i64 = 90;
const LNG_MAX: i64 = 180;
/// Integer units per degree at full precision: 8000 * 5^5 and 8000 * 4^5.
const FINAL_LAT_PRECISION: i64 = 8000 * 3125;
const FINAL_LNG_PRECISION: i64 = 8000 * 1024;

pub const MIN_CODE_LENGTH: usize = 2;

/// Latitude and longitude as integers at full precision, latitude clipped and longitude wrapped.
fn to_integers(lat: f64, lng: f64) -> (i64, i64) {
    let lat_span = 2 * LAT_MAX * FINAL_LAT_PRECISION;
    let lng_span = 2 * LNG_MAX * FINAL_LNG_PRECISION;
    let mut lat_val = (lat * FINAL_LAT_PRECISION as f64).floor() as i64 + LAT_MAX * FINAL_LAT_PRECISION;
    lat_val = lat_val.clamp(0, lat_span - 1);
    let lng_val = (lng * FINAL_LNG_PRECISION as f64).floor() as i64 + LNG_MAX * FINAL_LNG_PRECISION;
    (lat_val, lng_val.rem_euclid(lng_span))
}

/// Encodes a location. `code_length` is clamped to [2, 15] and rounded up to even below 10.
pub fn encode(lat: f64, lng: f64, code_length: usize) -> String {
    let mut len = code_length.clamp(MIN_CODE_LENGTH, MAX_DIGIT_COUNT);
    if len < PAIR_CODE_LENGTH && len % 2 == 1 {
        len += 1;
    }
    let (mut lat_val, mut lng_val) = to_integers(lat, lng);
    let mut rev: Vec<u8> = Vec::with_capacity(MAX_DIGIT_COUNT);
    if len > PAIR_CODE_LENGTH {
        for _ in 0..MAX_DIGIT_COUNT - PAIR_CODE_LENGTH {
            let idx = (lat_val % GRID_ROWS) * GRID_COLUMNS + lng_val % GRID_COLUMNS;
            rev.push(ALPHABET[idx as usize]);
            lat_val /= GRID_ROWS;
            lng_val /= GRID_COLUMNS;
        }
    } else {
        lat_val /= GRID_ROWS.pow(GRID_CODE_LENGTH);
        lng_val /= GRID_COLUMNS.pow(GRID_CODE_LENGTH);
    }
    for _ in 0..PAIR_CODE_LENGTH / 2 {
        rev.push(ALPHABET[(lng_val % ENCODING_BASE) as usize]);
        rev.push(ALPHABET[(lat_val % ENCODING_BASE) as usize]);
        lat_val /= ENCODING_BASE;
        lng_val /= ENCODING_BASE;
    }
    rev.reverse();
    let digits = String::from_utf8(rev).expect("alphabet is ascii");
    let mut code = String::with_capacity(len + 1);
    if len >= SEPARATOR_POSITION {
        code.push_str(&digits[..SEPARATOR_POSITION]);
        code.push(SEPARATOR);
        code.push_str(&digits[SEPARATOR_POSITION..len]);
    } else {
        code.push_str(&digits[..len]);
        code.extend(std::iter::repeat_n('0', SEPARATOR_POSITION - len));
        code.push(SEPARATOR);
    }
    code
}

/// The 10-digit code used as a feature id.
pub fn plus_code_id(lat: f64, lng: f64) -> String {
    encode(lat, lng, PAIR_CODE_LENGTH)
}

/// Ids for a sequence of codes: repeats get `-1`, `-2`, ... in order of appearance.
pub fn disambiguate(codes: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    codes
        .into_iter()
        .map(|c| {
            let n = seen.entry(c.clone()).or_default();
            let id = if *n == 0 { c } else { format!("{c}-{n}") };
            *n += 1;
            id
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_codes_are_padded() {
        assert_eq!(encode(20.5, 2.5, 4), "7FG40000+");
        assert_eq!(encode(20.5, 2.5, 3), "7FG40000+");
        assert_eq!(plus_code_id(47.0000625, 8.0000625), "8FVC2222+22");
    }

    #[test]
    fn half_open_cells() {
        // exactly on a 10-digit cell corner belongs to the cell to the north-east
        let a = plus_code_id(47.0, 8.0);
        let b = plus_code_id(47.0 - 1e-9, 8.0 - 1e-9);
        assert_eq!(a, "8FVC2222+22");
        assert_ne!(a, b);
    }

    #[test]
    fn repeats_get_suffixes() {
        let ids = disambiguate(["A".to_string(), "B".into(), "A".into(), "A".into()]);
        assert_eq!(ids, vec!["A", "B", "A-1", "A-2"]);
    }
}
