//! Programs and reference data bundled with the crate.

/// The pinned reference program embedded in generation prompts.
pub const CANONICAL_EXAMPLE: &str = include_str!("../assets/canonical.st");

/// Clean, hand-written programs: `(file name, source)`.
pub const CORPUS: &[(&str, &str)] = &[
    ("00_canonical.st", include_str!("../assets/corpus/00_canonical.st")),
    ("01_blink_lamp.st", include_str!("../assets/corpus/01_blink_lamp.st")),
    (
        "02_conveyor_interlock.st",
        include_str!("../assets/corpus/02_conveyor_interlock.st"),
    ),
    (
        "03_parts_counter.st",
        include_str!("../assets/corpus/03_parts_counter.st"),
    ),
    ("04_tank_level.st", include_str!("../assets/corpus/04_tank_level.st")),
    ("05_star_delta.st", include_str!("../assets/corpus/05_star_delta.st")),
    (
        "06_array_average.st",
        include_str!("../assets/corpus/06_array_average.st"),
    ),
    (
        "07_traffic_light.st",
        include_str!("../assets/corpus/07_traffic_light.st"),
    ),
    ("08_fifo_push.st", include_str!("../assets/corpus/08_fifo_push.st")),
    (
        "09_pump_alternation.st",
        include_str!("../assets/corpus/09_pump_alternation.st"),
    ),
    (
        "10_scaling_function.st",
        include_str!("../assets/corpus/10_scaling_function.st"),
    ),
    ("11_motor_fb.st", include_str!("../assets/corpus/11_motor_fb.st")),
    ("12_debounce.st", include_str!("../assets/corpus/12_debounce.st")),
    (
        "13_while_search.st",
        include_str!("../assets/corpus/13_while_search.st"),
    ),
    ("14_repeat_fill.st", include_str!("../assets/corpus/14_repeat_fill.st")),
    (
        "15_pulse_generator.st",
        include_str!("../assets/corpus/15_pulse_generator.st"),
    ),
    (
        "16_down_counter.st",
        include_str!("../assets/corpus/16_down_counter.st"),
    ),
    ("17_limits.st", include_str!("../assets/corpus/17_limits.st")),
    ("18_bit_masks.st", include_str!("../assets/corpus/18_bit_masks.st")),
    (
        "19_temperature_hysteresis.st",
        include_str!("../assets/corpus/19_temperature_hysteresis.st"),
    ),
    (
        "20_batch_sequence.st",
        include_str!("../assets/corpus/20_batch_sequence.st"),
    ),
    (
        "21_external_labels.st",
        include_str!("../assets/corpus/21_external_labels.st"),
    ),
    (
        "22_string_message.st",
        include_str!("../assets/corpus/22_string_message.st"),
    ),
    (
        "23_running_hours.st",
        include_str!("../assets/corpus/23_running_hours.st"),
    ),
    ("24_for_by_step.st", include_str!("../assets/corpus/24_for_by_step.st")),
    ("25_real_math.st", include_str!("../assets/corpus/25_real_math.st")),
    ("26_increment.st", include_str!("../assets/corpus/26_increment.st")),
    ("27_move_values.st", include_str!("../assets/corpus/27_move_values.st")),
    ("28_nested_if.st", include_str!("../assets/corpus/28_nested_if.st")),
    (
        "29_fb_with_timer.st",
        include_str!("../assets/corpus/29_fb_with_timer.st"),
    ),
    (
        "30_unsigned_counter.st",
        include_str!("../assets/corpus/30_unsigned_counter.st"),
    ),
    (
        "31_return_early.st",
        include_str!("../assets/corpus/31_return_early.st"),
    ),
    (
        "32_dword_shift_flags.st",
        include_str!("../assets/corpus/32_dword_shift_flags.st"),
    ),
];
