use skytrack_core::eval::TaskSpec;
use skytrack_core::{Pose, Predicate, SemanticQuery};

/// Pulls schema attributes out of an English referring expression: a
/// "<color> shirt" phrase, a posture word and the word "injured". Anything
/// unrecognised leaves the predicate unconstrained.
pub fn referring_expression_predicate(text: &str) -> Predicate {
    let lower = text.to_ascii_lowercase();
    let words: Vec<&str> =
        lower.split(|c: char| !c.is_ascii_alphanumeric() && c != '_' && c != '-').filter(|w| !w.is_empty()).collect();
    let mut pred = Predicate::default();
    for (i, w) in words.iter().enumerate() {
        match *w {
            "shirt" | "t-shirt" | "jacket" if i > 0 => {
                let color = words[i - 1];
                if !matches!(color, "a" | "the" | "any") {
                    pred.shirt_color = Some(color.to_owned());
                }
            }
            "lying" | "laying" if words.get(i + 1) == Some(&"down") => pred.pose = Some(Pose::LayingDown),
            "standing" => pred.pose = Some(Pose::Standing),
            "sitting" | "seated" => pred.pose = Some(Pose::Seated),
            "walking" => pred.pose = Some(Pose::Walking),
            "running" => pred.pose = Some(Pose::Running),
            "injured" | "wounded" => pred.injured = Some(true),
            _ => {}
        }
    }
    pred
}

/// The eight detection objectives: any person, three shirt colors, three
/// postures and injured.
pub fn sard_tasks() -> Vec<TaskSpec> {
    let specs: [(&str, &str); 8] = [
        ("any_person", "Locate any person in view."),
        ("shirt_gray", "Locate the person in a gray shirt."),
        ("shirt_green", "Locate the person in a green shirt."),
        ("shirt_blue", "Locate the person in a blue shirt."),
        ("pose_laying_down", "Locate the person who is laying down."),
        ("pose_standing", "Locate the person who is standing."),
        ("pose_seated", "Locate the person who is sitting."),
        ("injured", "Locate the injured person."),
    ];
    specs
        .iter()
        .map(|(id, text)| {
            let query =
                SemanticQuery::new("person", referring_expression_predicate(text), *text).expect("class is set");
            TaskSpec::new(*id, query)
        })
        .collect()
}
