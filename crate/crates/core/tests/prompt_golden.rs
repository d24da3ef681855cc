use raicl::prompt::{assemble_prompt, ControlLayout, PromptTemplate, Task};
use raicl::store::ScenarioRecord;

#[test]
fn one_exemplar_prompt_matches_golden_file() {
    let exemplar = ScenarioRecord {
        id: "e1".into(),
        video_emb: vec![0.1, 0.2],
        control_vec: vec![2.0, -0.5, -1.25, 0.001],
        action_text: "car brakes to a stop".into(),
        justification_text: "because the traffic light turned red".into(),
        target_speed: 0.75,
        target_course: -0.4,
    };
    let query = ScenarioRecord {
        id: "q1".into(),
        video_emb: vec![0.3, 0.4],
        control_vec: vec![12.344, 3.0, 0.2, 0.008],
        action_text: "hidden".into(),
        justification_text: "hidden".into(),
        target_speed: 99.0,
        target_course: 99.0,
    };
    let bundle = assemble_prompt(
        &query,
        &[&exemplar],
        &PromptTemplate::default(),
        &ControlLayout::with_intervals(1),
        &[Task::Control, Task::Action],
    )
    .unwrap();
    let golden = include_str!("golden/one_exemplar.txt");
    assert_eq!(bundle.render(), golden);
    assert!(!bundle.render().contains("hidden"));
}
