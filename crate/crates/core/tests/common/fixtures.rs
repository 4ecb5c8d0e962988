/// `(prediction, gold, exact match, token F1)` worked by hand.
pub const METRIC_CASES: [(&str, &str, f64, f64); 20] = [
    ("special training", "special training", 1.0, 1.0),
    ("training", "special training", 0.0, 2.0 / 3.0),
    ("", "", 1.0, 1.0),
    ("", "special training", 0.0, 0.0),
    ("special training", "", 0.0, 0.0),
    ("Special Training", "special training", 1.0, 1.0),
    ("special training.", "special training", 1.0, 1.0),
    ("the special training", "special training", 1.0, 1.0),
    ("a special, training!", "an special training", 1.0, 1.0),
    ("  special   training ", "special training", 1.0, 1.0),
    ("special", "training", 0.0, 0.0),
    ("special training program", "special training", 0.0, 0.8),
    ("training special", "special training", 0.0, 1.0),
    ("the the", "a", 1.0, 1.0),
    ("new york city", "york", 0.0, 0.5),
    ("cat cat", "cat", 0.0, 2.0 / 3.0),
    ("cat", "cat cat dog", 0.0, 0.5),
    ("one two three four", "two four six", 0.0, 4.0 / 7.0),
    ("U.S.", "us", 1.0, 1.0),
    ("rock'n'roll", "rocknroll", 1.0, 1.0),
];
