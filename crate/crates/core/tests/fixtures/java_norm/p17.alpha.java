public class Sorter {
    // variant build
    public static String classify(Object item) {
        if (item instanceof String) {
            return "text";
        }
        if (item instanceof Integer) {
            return "number";
        }
        return "other";
    }

    public static void main(String[] argv) {
        System.out.println(classify("report") + classify(7));
    }
}
