package mini.calc;

import java.util.HashMap;
import java.util.Map;

/**
 * Variable bindings visible to the evaluator.
 */
public class Environment {
    private final Map<String, Double> values = new HashMap<>();
    private final Environment parent;

    public Environment(Environment parent) {
        this.parent = parent;
    }

    public void define(String name, double value) {
        values.put(name, value);
    }

    public double lookup(String name) {
        Double v = values.get(name);
        if (v != null) {
            return v;
        }
        if (parent != null) {
            return parent.lookup(name);
        }
        return 0.0;
    }

    public boolean contains(String name) {
        return values.containsKey(name) || (parent != null && parent.contains(name));
    }

    public int size() {
        return values.size();
    }
}
