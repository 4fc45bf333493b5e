//! Porter stemming algorithm, following the widely distributed reference
//! implementation (including its two documented departures from the 1980
//! paper: step 2 maps "bli" to "ble" and adds "logi" to "log").

/// Stems a single lowercase word. Words of length <= 2 are returned as-is.
/// Non-ASCII-alphabetic bytes are treated as consonants, matching the
/// reference implementation's behavior on unexpected input.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.is_ascii() {
        return word.to_string();
    }
    let mut s = Stemmer {
        b: word.as_bytes().to_vec(),
    };
    s.step1ab();
    s.step1c();
    s.step2();
    s.step3();
    s.step4();
    s.step5();
    String::from_utf8(s.b).expect("ascii in, ascii out")
}

struct Stemmer {
    b: Vec<u8>,
}

impl Stemmer {
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => {
                if i == 0 {
                    true
                } else {
                    !self.is_consonant(i - 1)
                }
            }
            _ => true,
        }
    }

    /// Measure of the stem b[0..j]: the number of VC sequences.
    fn measure(&self, j: usize) -> usize {
        let mut n = 0;
        let mut i = 0;
        // skip initial consonants
        while i < j && self.is_consonant(i) {
            i += 1;
        }
        loop {
            // in vowels
            while i < j && !self.is_consonant(i) {
                i += 1;
            }
            if i == j {
                return n;
            }
            // in consonants
            while i < j && self.is_consonant(i) {
                i += 1;
            }
            n += 1;
            if i == j {
                return n;
            }
        }
    }

    fn has_vowel(&self, j: usize) -> bool {
        (0..j).any(|i| !self.is_consonant(i))
    }

    /// Stem b[0..j] ends with a double consonant.
    fn double_consonant(&self, j: usize) -> bool {
        j >= 2 && self.b[j - 1] == self.b[j - 2] && self.is_consonant(j - 1)
    }

    /// b[0..j] ends consonant-vowel-consonant where the final consonant is
    /// not w, x, or y.
    fn cvc(&self, j: usize) -> bool {
        if j < 3 || !self.is_consonant(j - 1) || self.is_consonant(j - 2) || !self.is_consonant(j - 3)
        {
            return false;
        }
        !matches!(self.b[j - 1], b'w' | b'x' | b'y')
    }

    fn ends(&self, suffix: &str) -> bool {
        self.b.ends_with(suffix.as_bytes())
    }

    /// Replaces the last `old_len` bytes with `new`.
    fn set_to(&mut self, old_len: usize, new: &str) {
        let keep = self.b.len() - old_len;
        self.b.truncate(keep);
        self.b.extend_from_slice(new.as_bytes());
    }

    /// Stem length if `suffix` were removed.
    fn stem_len(&self, suffix: &str) -> usize {
        self.b.len() - suffix.len()
    }

    fn replace_if_m_gt0(&mut self, suffix: &str, new: &str) -> bool {
        if self.ends(suffix) && self.measure(self.stem_len(suffix)) > 0 {
            self.set_to(suffix.len(), new);
            true
        } else {
            false
        }
    }

    fn step1ab(&mut self) {
        if self.ends("s") {
            if self.ends("sses") {
                self.set_to(4, "ss");
            } else if self.ends("ies") {
                self.set_to(3, "i");
            } else if !self.ends("ss") {
                self.set_to(1, "");
            }
        }
        let mut cleanup = false;
        if self.ends("eed") {
            if self.measure(self.stem_len("eed")) > 0 {
                self.set_to(3, "ee");
            }
        } else if self.ends("ed") && self.has_vowel(self.stem_len("ed")) {
            self.set_to(2, "");
            cleanup = true;
        } else if self.ends("ing") && self.has_vowel(self.stem_len("ing")) {
            self.set_to(3, "");
            cleanup = true;
        }
        if cleanup {
            if self.ends("at") || self.ends("bl") || self.ends("iz") {
                self.b.push(b'e');
            } else if self.double_consonant(self.b.len())
                && !matches!(self.b[self.b.len() - 1], b'l' | b's' | b'z')
            {
                self.b.pop();
            } else if self.measure(self.b.len()) == 1 && self.cvc(self.b.len()) {
                self.b.push(b'e');
            }
        }
    }

    fn step1c(&mut self) {
        if self.ends("y") && self.has_vowel(self.b.len() - 1) {
            let n = self.b.len();
            self.b[n - 1] = b'i';
        }
    }

    fn step2(&mut self) {
        let rules: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("bli", "ble"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
            ("logi", "log"),
        ];
        for (suffix, new) in rules {
            if self.ends(suffix) {
                self.replace_if_m_gt0(suffix, new);
                return;
            }
        }
    }

    fn step3(&mut self) {
        let rules: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        for (suffix, new) in rules {
            if self.ends(suffix) {
                self.replace_if_m_gt0(suffix, new);
                return;
            }
        }
    }

    fn step4(&mut self) {
        let suffixes: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent",
            "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        for suffix in suffixes {
            if self.ends(suffix) {
                let j = self.stem_len(suffix);
                if *suffix == "ion" && !(j >= 1 && matches!(self.b[j - 1], b's' | b't')) {
                    return;
                }
                if self.measure(j) > 1 {
                    self.set_to(suffix.len(), "");
                }
                return;
            }
        }
    }

    fn step5(&mut self) {
        // step 5a
        if self.ends("e") {
            let j = self.b.len() - 1;
            let m = self.measure(j);
            if m > 1 || (m == 1 && !self.cvc(j)) {
                self.b.pop();
            }
        }
        // step 5b
        let n = self.b.len();
        if n >= 1 && self.b[n - 1] == b'l' && self.double_consonant(n) && self.measure(n) > 1 {
            self.b.pop();
        }
    }
}
