//! Workloads shared by the benchmarks.

use distill::{ActionRef, GoalSet, Trace};

fn calls(list: &[&str]) -> Vec<ActionRef> {
    list.iter()
        .map(|c| c.parse().expect("benchmark action parses"))
        .collect()
}

/// Grab, move, deliver: filters down to the delivery.
pub fn scenario() -> Trace {
    Trace::user_created(
        "scenario",
        calls(&["grab(ibuprofen)", "moveTo(icu)", "deliver(ibuprofen, doctor)"]),
    )
}

/// A twelve-step walk delivering both structured items by hand.
pub fn long_demonstration() -> Trace {
    Trace::user_created(
        "long",
        calls(&[
            "moveTo(pharmacy)",
            "grab(ibuprofen)",
            "moveTo(nurse_station)",
            "moveTo(hallway)",
            "moveTo(room_1201)",
            "deliver(ibuprofen, patient)",
            "moveTo(hallway)",
            "moveTo(nurse_station)",
            "grab(xray_file)",
            "moveTo(hallway)",
            "moveTo(icu)",
            "deliver(xray_file, doctor)",
        ]),
    )
}

pub fn goals(atoms: &[&str]) -> GoalSet {
    atoms
        .iter()
        .map(|a| a.parse().expect("benchmark atom parses"))
        .collect()
}

pub const TEXTS: [&str; 4] = [
    "deliver medication then linens",
    "Grab the ibuprofen for the patient and get the xray file to the doctor.",
    "First the xray file for the doctor, next the ibuprofen for the patient.",
    "If the doctor is busy, inform the nurse about the lab results as well.",
];
