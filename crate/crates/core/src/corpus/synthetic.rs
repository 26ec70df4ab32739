//! Template-based synthetic corpus of offers and non-offers.
//!
//! Positive documents always carry an offer title and an offer number; the
//! remaining offer features are inserted at random. Negative documents are
//! invoices, delivery notes or price lists and always carry a counter-indicator
//! in their heading. Every document records what was inserted in its `meta`:
//!
//! - `synthetic` = `"true"`
//! - `family` ∈ {`offer`, `invoice`, `delivery_note`, `price_list`}
//! - `lang` ∈ {`de`, `en`}
//! - `features`: comma-separated predicate keys that were realized
//! - `span.<KEY>`: `start:end` character span of the phrase realizing `KEY`

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Document};
use crate::predicates::PredicateKey;

pub const META_SYNTHETIC: &str = "synthetic";
pub const META_FAMILY: &str = "family";
pub const META_FEATURES: &str = "features";
pub const META_SPAN_PREFIX: &str = "span.";

const ENGLISH_SHARE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Offer,
    Invoice,
    DeliveryNote,
    PriceList,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Offer => "offer",
            Family::Invoice => "invoice",
            Family::DeliveryNote => "delivery_note",
            Family::PriceList => "price_list",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Lang {
    De,
    En,
}

/// Incrementally assembled document text that tracks character offsets of
/// feature phrases.
struct Builder {
    text: String,
    chars: usize,
    spans: BTreeMap<PredicateKey, (usize, usize)>,
}

impl Builder {
    fn new() -> Self {
        Self {
            text: String::new(),
            chars: 0,
            spans: BTreeMap::new(),
        }
    }

    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn line(&mut self, s: &str) {
        self.push(s);
        self.push("\n");
    }

    fn feature(&mut self, key: PredicateKey, s: &str) {
        let start = self.chars;
        self.push(s);
        self.spans.entry(key).or_insert((start, self.chars));
        self.push("\n");
    }
}

const COMPANIES: &[&str] = &[
    "Müller Bürotechnik GmbH",
    "Schneider Laborbedarf AG",
    "Becker IT-Systeme GmbH & Co. KG",
    "Hoffmann Medizintechnik GmbH",
    "Wagner Gebäudeservice e.K.",
    "Koch Elektro GmbH",
    "Richter Möbelwerkstätten GmbH",
    "Schulz Analytik GmbH",
    "Neumann Fahrzeugtechnik AG",
    "Zimmermann Druck & Medien GmbH",
];

const CITIES: &[(&str, &str)] = &[
    ("79098", "Freiburg"),
    ("70173", "Stuttgart"),
    ("80331", "München"),
    ("10115", "Berlin"),
    ("50667", "Köln"),
    ("60311", "Frankfurt am Main"),
    ("20095", "Hamburg"),
    ("04109", "Leipzig"),
];

const STREETS: &[&str] = &[
    "Hauptstraße",
    "Industriestraße",
    "Bahnhofstraße",
    "Gewerbepark",
    "Am Mühlbach",
    "Schillerstraße",
];

const PEOPLE: &[(&str, &str)] = &[
    ("Frau", "Anna Schmidt"),
    ("Herr", "Jonas Weber"),
    ("Frau", "Lea Fischer"),
    ("Herr", "Markus Braun"),
    ("Frau", "Sophie Krüger"),
    ("Herr", "Thomas Lang"),
];

const ITEMS_DE: &[&str] = &[
    "Laborzentrifuge Typ LZ-200",
    "Bürostuhl ergonomisch, schwarz",
    "Notebook 14 Zoll, 16 GB RAM",
    "Wartungsvertrag Klimaanlage (12 Monate)",
    "Pipettenspitzen, steril, 1000 Stk.",
    "Monitor 27 Zoll, höhenverstellbar",
    "Reinigung Büroflächen pauschal",
    "Netzwerk-Switch 24 Port",
    "Schreibtisch 160 x 80 cm",
    "Kalibrierung Messgeräte vor Ort",
];

const ITEMS_EN: &[&str] = &[
    "Laboratory centrifuge LZ-200",
    "Ergonomic office chair, black",
    "Notebook 14 inch, 16 GB RAM",
    "Maintenance contract air conditioning (12 months)",
    "Sterile pipette tips, 1000 pcs.",
    "Monitor 27 inch, height adjustable",
];

fn date(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{:02}.{:02}.{}",
        rng.random_range(1..=28),
        rng.random_range(1..=12),
        rng.random_range(2022..=2025)
    )
}

fn header(b: &mut Builder, rng: &mut ChaCha8Rng) {
    let company = COMPANIES.choose(rng).unwrap();
    let (zip, city) = CITIES.choose(rng).unwrap();
    let street = STREETS.choose(rng).unwrap();
    b.line(company);
    b.line(&format!("{street} {}, {zip} {city}", rng.random_range(1..120)));
    b.line("");
}

fn item_lines(b: &mut Builder, rng: &mut ChaCha8Rng, lang: Lang) -> f64 {
    let pool = if lang == Lang::De { ITEMS_DE } else { ITEMS_EN };
    let n = rng.random_range(2..=5);
    let mut total = 0.0;
    for pos in 1..=n {
        let item = pool.choose(rng).unwrap();
        let qty = rng.random_range(1..=20);
        let price = rng.random_range(15..2500) as f64 + 0.5 * rng.random_range(0..2) as f64;
        total += qty as f64 * price;
        match lang {
            Lang::De => b.line(&format!("Pos. {pos}  {item}  {qty} Stk.  je {price:.2} EUR")),
            Lang::En => b.line(&format!("Item {pos}  {item}  {qty} pcs.  {price:.2} EUR each")),
        }
    }
    total
}

fn person(rng: &mut ChaCha8Rng) -> (&'static str, &'static str) {
    *PEOPLE.choose(rng).unwrap()
}

fn offer_document(b: &mut Builder, rng: &mut ChaCha8Rng, lang: Lang) {
    use PredicateKey::*;
    header(b, rng);
    let number = format!("{}-{}-{:04}", if rng.random_bool(0.5) { "AN" } else { "ANG" }, rng.random_range(2022..=2025), rng.random_range(1..10000));
    match lang {
        Lang::De => {
            let title = ["Angebot", "ANGEBOT", "Angebot für Ihre Anfrage", "Kostenvoranschlag und Angebot"]
                .choose(rng)
                .unwrap();
            b.feature(Title, title);
            let num = [
                format!("Angebotsnummer: {number}"),
                format!("Angebot Nr. {number}"),
                format!("Angebots-Nr.: {number}"),
            ]
            .choose(rng)
            .unwrap()
            .clone();
            b.feature(Number, &num);
            b.line(&format!("Datum: {}", date(rng)));
            b.line("");
            b.line("Sehr geehrte Damen und Herren,");
            b.line("vielen Dank für Ihre Anfrage. Gerne unterbreiten wir Ihnen folgende Positionen:");
            b.line("");
        }
        Lang::En => {
            let title = ["Quotation", "QUOTATION", "Offer for your request"].choose(rng).unwrap();
            b.feature(Title, title);
            let num = [format!("Quotation No.: {number}"), format!("Offer No. {number}")]
                .choose(rng)
                .unwrap()
                .clone();
            b.feature(Number, &num);
            b.line(&format!("Date: {}", date(rng)));
            b.line("");
            b.line("Dear Sir or Madam,");
            b.line("thank you for your enquiry. We are pleased to quote the following items:");
            b.line("");
        }
    }
    let total = item_lines(b, rng, lang);
    b.line("");
    match lang {
        Lang::De => b.line(&format!("Gesamtsumme netto: {total:.2} EUR zzgl. 19 % MwSt.")),
        Lang::En => b.line(&format!("Total net: {total:.2} EUR plus VAT.")),
    }
    b.line("");

    let mut clauses: Vec<(PredicateKey, String)> = Vec::new();
    if rng.random_bool(0.75) {
        let s = match lang {
            Lang::De => [
                format!("Dieses Angebot ist gültig bis {}.", date(rng)),
                format!("Bindefrist: {} Tage ab Angebotsdatum.", [30, 45, 60].choose(rng).unwrap()),
                "Das Angebot ist vier Wochen gültig.".to_string(),
            ]
            .choose(rng)
            .unwrap()
            .clone(),
            Lang::En => format!("This offer is valid until {}.", date(rng)),
        };
        clauses.push((Validity, s));
    }
    if rng.random_bool(0.5) {
        let s = match lang {
            Lang::De => ["Zwischenverkauf vorbehalten.", "Preisänderungen und Irrtümer vorbehalten.", "Technische Änderungen vorbehalten."]
                .choose(rng)
                .unwrap()
                .to_string(),
            Lang::En => "Subject to prior sale and errors excepted.".to_string(),
        };
        clauses.push((Reservation, s));
    }
    if rng.random_bool(0.8) {
        let s = match lang {
            Lang::De => [
                "Zahlungsbedingungen: 30 Tage netto, 2 % Skonto bei Zahlung innerhalb von 10 Tagen.",
                "Zahlungsziel: 14 Tage ohne Abzug.",
                "Zahlbar innerhalb von 30 Tagen netto nach Erhalt der Ware.",
            ]
            .choose(rng)
            .unwrap()
            .to_string(),
            Lang::En => "Payment terms: 30 days net, 2 % discount within 10 days.".to_string(),
        };
        clauses.push((Payment, s));
    }
    if rng.random_bool(0.75) {
        let s = match lang {
            Lang::De => [
                format!("Lieferzeit: ca. {} Wochen nach Auftragseingang.", rng.random_range(1..=8)),
                "Lieferbedingungen: frei Haus, Lieferung innerhalb von 10 Werktagen.".to_string(),
                "Lieferung ab Lager, solange Vorrat reicht.".to_string(),
            ]
            .choose(rng)
            .unwrap()
            .clone(),
            Lang::En => format!("Delivery time: approx. {} weeks after order.", rng.random_range(1..=8)),
        };
        clauses.push((Delivery, s));
    }
    if rng.random_bool(0.7) {
        let (title, name) = person(rng);
        let s = match lang {
            Lang::De => format!(
                "Ihr Ansprechpartner für dieses Angebot: {title} {name}, Tel. 0{} {}",
                rng.random_range(200..999),
                rng.random_range(100000..999999)
            ),
            Lang::En => format!(
                "Your contact person for this offer: {name}, phone +49 {} {}",
                rng.random_range(200..999),
                rng.random_range(100000..999999)
            ),
        };
        clauses.push((Contact, s));
    }
    clauses.shuffle(rng);
    for (key, s) in &clauses {
        b.feature(*key, s);
    }
    // billing remarks mention the counter-indicator word without making the
    // document a non-offer
    if rng.random_bool(0.3) {
        match lang {
            Lang::De => b.line("Die Rechnungsstellung erfolgt nach vollständiger Lieferung."),
            Lang::En => b.line("The invoice will be issued after complete delivery."),
        }
    }
    b.line("");
    match lang {
        Lang::De => b.line("Wir freuen uns auf Ihren Auftrag.\nMit freundlichen Grüßen"),
        Lang::En => b.line("We look forward to your order.\nKind regards"),
    }
}

fn invoice_document(b: &mut Builder, rng: &mut ChaCha8Rng, lang: Lang) {
    use PredicateKey::*;
    header(b, rng);
    let number = format!("RE-{}-{:05}", rng.random_range(2022..=2025), rng.random_range(1..100000));
    match lang {
        Lang::De => {
            b.feature(NotOffer, ["Rechnung", "RECHNUNG", "Rechnung / Leistungsnachweis"].choose(rng).unwrap());
            b.line(&format!("Rechnungsnummer: {number}"));
            b.line(&format!("Rechnungsdatum: {}", date(rng)));
            b.line(&format!("Leistungsdatum: {}", date(rng)));
            b.line("");
            b.line("Sehr geehrte Damen und Herren,");
            b.line("für die erbrachten Leistungen berechnen wir Ihnen:");
        }
        Lang::En => {
            b.feature(NotOffer, "Invoice");
            b.line(&format!("Invoice number: {number}"));
            b.line(&format!("Invoice date: {}", date(rng)));
            b.line("");
            b.line("For services rendered we charge you as follows:");
        }
    }
    b.line("");
    let total = item_lines(b, rng, lang);
    b.line("");
    match lang {
        Lang::De => b.line(&format!("Rechnungsbetrag brutto: {:.2} EUR", total * 1.19)),
        Lang::En => b.line(&format!("Invoice total: {:.2} EUR", total * 1.19)),
    }
    if rng.random_bool(0.9) {
        let s = match lang {
            Lang::De => "Zahlungsziel: 14 Tage ab Rechnungsdatum ohne Abzug.",
            Lang::En => "Payment terms: due within 14 days without deduction.",
        };
        b.feature(Payment, s);
    }
    b.line("Bankverbindung: Sparkasse, IBAN DE12 3456 7890 1234 5678 90");
    if rng.random_bool(0.4) {
        let (title, name) = person(rng);
        b.feature(Contact, &format!("Bei Rückfragen wenden Sie sich an {title} {name}, Tel. 0761 {}", rng.random_range(10000..99999)));
    }
}

fn delivery_note_document(b: &mut Builder, rng: &mut ChaCha8Rng, lang: Lang) {
    use PredicateKey::*;
    header(b, rng);
    let number = format!("LS-{}-{:05}", rng.random_range(2022..=2025), rng.random_range(1..100000));
    match lang {
        Lang::De => {
            b.feature(NotOffer, ["Lieferschein", "LIEFERSCHEIN"].choose(rng).unwrap());
            b.line(&format!("Lieferschein-Nr.: {number}"));
            b.line(&format!("Lieferdatum: {}", date(rng)));
            b.line(&format!("Ihre Bestellung vom {}", date(rng)));
        }
        Lang::En => {
            b.feature(NotOffer, "Delivery Note");
            b.line(&format!("Delivery note no.: {number}"));
            b.line(&format!("Delivery date: {}", date(rng)));
        }
    }
    b.line("");
    item_lines(b, rng, lang);
    b.line("");
    if rng.random_bool(0.8) {
        let s = match lang {
            Lang::De => "Lieferung erfolgte frei Haus per Spedition.",
            Lang::En => "Delivered free domicile by freight forwarder.",
        };
        b.feature(Delivery, s);
    }
    match lang {
        Lang::De => b.line("Ware vollständig und unbeschädigt erhalten: ____________ (Unterschrift)"),
        Lang::En => b.line("Goods received complete and undamaged: ____________ (signature)"),
    }
}

fn price_list_document(b: &mut Builder, rng: &mut ChaCha8Rng, lang: Lang) {
    use PredicateKey::*;
    header(b, rng);
    match lang {
        Lang::De => {
            let year = rng.random_range(2022..=2025);
            b.feature(NotOffer, &format!("Preisliste {year}"));
            b.line(&format!("gültig ab 01.01.{year}"));
            b.line("Unser aktuelles Sortiment im Überblick:");
        }
        Lang::En => {
            b.feature(NotOffer, "Price List");
            b.line("Our current range at a glance:");
        }
    }
    b.line("");
    item_lines(b, rng, lang);
    b.line("");
    if rng.random_bool(0.8) {
        let s = match lang {
            Lang::De => "Alle Preise freibleibend. Preisänderungen vorbehalten.",
            Lang::En => "All prices subject to change without notice.",
        };
        b.feature(Reservation, s);
    }
    if rng.random_bool(0.3) {
        let (title, name) = person(rng);
        b.feature(Contact, &format!("Ansprechpartner Vertrieb: {title} {name}"));
    }
}

/// Builds `n` documents, `round(n * positive_rate)` of them positive.
/// Deterministic in `(n, positive_rate, seed)`.
pub fn generate_synthetic_corpus(
    n: usize,
    positive_rate: f64,
    seed: u64,
) -> Result<Vec<Document>, CorpusError> {
    if !(0.0..=1.0).contains(&positive_rate) {
        return Err(CorpusError::PositiveRate(positive_rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = (n as f64 * positive_rate).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
    labels.shuffle(&mut rng);

    let width = n.to_string().len().max(4);
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let lang = if rng.random_bool(ENGLISH_SHARE) { Lang::En } else { Lang::De };
            let family = if label == 1 {
                Family::Offer
            } else {
                *[Family::Invoice, Family::DeliveryNote, Family::PriceList]
                    .choose(&mut rng)
                    .unwrap()
            };
            let mut b = Builder::new();
            match family {
                Family::Offer => offer_document(&mut b, &mut rng, lang),
                Family::Invoice => invoice_document(&mut b, &mut rng, lang),
                Family::DeliveryNote => delivery_note_document(&mut b, &mut rng, lang),
                Family::PriceList => price_list_document(&mut b, &mut rng, lang),
            }
            let mut meta = BTreeMap::new();
            meta.insert(META_SYNTHETIC.to_string(), "true".to_string());
            meta.insert(META_FAMILY.to_string(), family.name().to_string());
            meta.insert(
                "lang".to_string(),
                if lang == Lang::De { "de" } else { "en" }.to_string(),
            );
            let features: Vec<&str> = b.spans.keys().map(|k| k.as_str()).collect();
            meta.insert(META_FEATURES.to_string(), features.join(","));
            for (key, (start, end)) in &b.spans {
                meta.insert(format!("{META_SPAN_PREFIX}{}", key.as_str()), format!("{start}:{end}"));
            }
            Document {
                id: format!("syn-{i:0width$}"),
                text: b.text,
                label: Some(label),
                source_meta: meta,
            }
        })
        .collect())
}
