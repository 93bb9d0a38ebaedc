from .scenario import Scenario, ScenarioError, load_scenario, save_scenario, scenario_from_dict
from .generators import FAMILIES, generate_scenario
from .validate import ValidationResult, validate_schedule
