package mini.calc;

import java.util.List;

/**
 * Walks an expression tree and computes its value.
 */
public class Evaluator {
    private final Environment env;

    public Evaluator(Environment env) {
        this.env = env;
    }

    public double evaluate(Node node) {
        switch (node.getKind()) {
            case NUMBER:
                return Double.parseDouble(node.getValue());
            case VARIABLE:
                return env.lookup(node.getValue());
            case UNARY:
                return applyUnary(node.getValue(), evaluate(node.getChildren().get(0)));
            case BINARY:
                return applyBinary(node.getValue(),
                        evaluate(node.getChildren().get(0)),
                        evaluate(node.getChildren().get(1)));
            case CALL:
                return callFunction(node.getValue(), node.getChildren());
            default:
                throw new IllegalStateException("unknown node " + node.getKind());
        }
    }

    double applyBinary(String op, double a, double b) {
        switch (op) {
            case "+": return a + b;
            case "-": return a - b;
            case "*": return a * b;
            case "/":
                if (b == 0) {
                    throw new ArithmeticException("division by zero");
                }
                return a / b;
            case "%":
                return a % b;
            default:
                throw new IllegalArgumentException("bad operator " + op);
        }
    }

    double applyUnary(String op, double a) {
        if (op.equals("-")) {
            return -a;
        }
        throw new IllegalArgumentException("bad unary operator " + op);
    }

    double callFunction(String name, List<Node> args) {
        if (name.equals("gcd")) {
            return MathUtil.gcd((long) evaluate(args.get(0)), (long) evaluate(args.get(1)));
        }
        if (name.equals("fact")) {
            return MathUtil.factorial((int) evaluate(args.get(0)));
        }
        if (name.equals("clamp")) {
            return MathUtil.clamp(evaluate(args.get(0)), evaluate(args.get(1)), evaluate(args.get(2)));
        }
        if (name.equals("pow")) {
            return MathUtil.pow(evaluate(args.get(0)), (int) evaluate(args.get(1)));
        }
        throw new IllegalArgumentException("unknown function " + name);
    }
}
